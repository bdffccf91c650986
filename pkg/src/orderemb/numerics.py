"""Dense float64 tensors, seeded RNG, Adam, and a finite-difference checker.

Vectors and matrices are plain C-contiguous ``numpy.float64`` arrays; the
helpers here validate and coerce. Everything downstream (penalties, encoders,
losses) computes in 64-bit so that gradient checks are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericError

__all__ = [
    "as_vector",
    "as_matrix",
    "check_finite",
    "Rng",
    "AdamState",
    "adam_step",
    "finite_diff_check",
]


def as_vector(x, name="vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting non-finite entries."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    check_finite(arr, name)
    return arr


def as_matrix(x, name="matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    check_finite(arr, name)
    return arr


def check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")


class Rng:
    """Deterministic seeded random source.

    Backed by numpy's Philox generator, a counter-based algorithm whose output
    for a given seed is identical across platforms and numpy releases. The
    same seed plus the same call sequence always reproduces the same stream;
    instances are single-writer and must not be shared across threads.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed & (2**64 - 1)))

    def uniform(self, lo: float, hi: float, shape=None) -> np.ndarray | float:
        """Uniform draw(s) from [lo, hi); scalar when shape is None."""
        if not lo < hi:
            raise ContractError(f"uniform range is empty: [{lo}, {hi})")
        out = self._gen.uniform(lo, hi, size=shape)
        return float(out) if shape is None else out

    def choice(self, n: int) -> int:
        """Uniform index in [0, n)."""
        if n < 1:
            raise ContractError(f"choice requires n >= 1, got {n}")
        return int(self._gen.integers(0, n))

    def choice_many(self, n: int, size: int, replace: bool = True) -> np.ndarray:
        """Vector of uniform indices in [0, n); without replacement if asked."""
        if n < 1:
            raise ContractError(f"choice requires n >= 1, got {n}")
        if not replace and size > n:
            raise ContractError(f"cannot draw {size} distinct items from {n}")
        if replace:
            return self._gen.integers(0, n, size=size)
        return self._gen.choice(n, size=size, replace=False)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self, tag: int) -> "Rng":
        """Independent child stream; deterministic function of (seed, tag)."""
        return Rng((self.seed * 1000003 + tag) & (2**63 - 1))


@dataclass
class AdamState:
    """Per-tensor Adam accumulator.

    ``m`` and ``v`` match the parameter's shape; ``t`` counts completed steps.
    Single-writer: never share one state across threads.
    """

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    name: str = "param"

    @classmethod
    def for_param(cls, param: np.ndarray, lr: float, name: str = "param",
                  beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        if lr <= 0:
            raise ContractError(f"learning rate must be positive, got {lr}")
        return cls(
            m=np.zeros_like(param, dtype=np.float64),
            v=np.zeros_like(param, dtype=np.float64),
            t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps, name=name,
        )


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update, in place on ``param`` and ``state``.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;
    param <- param - lr * m_hat / (sqrt(v_hat) + eps).
    """
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ContractError(
            f"adam_step shape mismatch for {state.name}: param {param.shape}, "
            f"grad {grad.shape}, state {state.m.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient for tensor {state.name!r}")
    state.t += 1
    from .kernels import adam_update

    adam_update(
        param.reshape(-1), np.ascontiguousarray(grad, dtype=np.float64).reshape(-1),
        state.m.reshape(-1), state.v.reshape(-1),
        state.t, state.lr, state.beta1, state.beta2, state.eps,
    )
    return param


def finite_diff_check(f, analytic_grad: np.ndarray, point: np.ndarray,
                      h: float = 1e-5, skip: np.ndarray | None = None) -> float:
    """Max relative error between central differences and an analytic gradient.

    Per coordinate: |(f(x+h) - f(x-h)) / 2h - g_i| / max(1, |g_i|); the
    maximum over unskipped coordinates is returned. Pass ``skip`` (a boolean
    mask) for coordinates sitting within ~1e-6 of a max(0, .) or abs kink,
    where a two-sided difference straddles the non-differentiable point and
    the comparison is meaningless.
    """
    if h <= 0:
        raise ContractError(f"step h must be positive, got {h}")
    point = np.asarray(point, dtype=np.float64)
    analytic_grad = np.asarray(analytic_grad, dtype=np.float64)
    if point.shape != analytic_grad.shape:
        raise ContractError(
            f"gradient shape {analytic_grad.shape} does not match point {point.shape}"
        )
    flat = point.reshape(-1)
    grad = analytic_grad.reshape(-1)
    mask = np.zeros(flat.shape, dtype=bool) if skip is None else np.asarray(skip).reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        if mask[i]:
            continue
        x = flat.copy()
        x[i] = flat[i] + h
        fp = float(f(x.reshape(point.shape)))
        x[i] = flat[i] - h
        fm = float(f(x.reshape(point.shape)))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"objective returned a non-finite value at coordinate {i}")
        cd = (fp - fm) / (2.0 * h)
        err = abs(cd - grad[i]) / max(1.0, abs(grad[i]))
        worst = max(worst, err)
    return worst
