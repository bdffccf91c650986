"""The reversed product order on the nonnegative orthant and its violation
penalty.

A point x is below y (x is the more specific item) exactly when every
coordinate of x is >= the corresponding coordinate of y; the origin is the
top element. The violation penalty for an ordered pair is
``penalty(x, y) = || max(0, y - x) ||^2``, zero precisely on ordered pairs.
Argument convention throughout the package: the lower/more-specific item
(hyponym, image, premise) comes first.
"""

from __future__ import annotations

import enum

import numpy as np

from . import kernels
from .errors import ContractError
from .numerics import as_vector

__all__ = [
    "Scorer",
    "penalty",
    "penalty_grads",
    "is_below",
    "join",
    "meet",
    "score",
    "distance",
    "penalty_rows",
    "penalty_rows_grad_upper",
    "cosine_rows",
    "cosine_rows_grads",
    "score_matrix",
]


class Scorer(enum.Enum):
    """Pair scorer: the asymmetric order penalty or its symmetric cosine
    ablation."""

    ORDER = "order"
    COSINE = "cosine"


def _check_same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise ContractError(f"dimension mismatch: {x.shape} vs {y.shape}")


def penalty(x, y) -> float:
    """Order-violation penalty ||max(0, y - x)||^2; zero iff x is below y."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    _check_same_dim(x, y)
    diff = np.maximum(0.0, y - x)
    return float(diff @ diff)


def penalty_grads(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of penalty(x, y) w.r.t. x and y.

    grad_y = 2*max(0, y - x) and grad_x = -grad_y; both vanish on
    coordinates where y <= x (the subgradient at the kink is taken as 0).
    """
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    _check_same_dim(x, y)
    grad_y = 2.0 * np.maximum(0.0, y - x)
    return -grad_y, grad_y


def is_below(x, y, tol: float = 0.0) -> bool:
    """True iff x sits below y in the reversed product order, within tol."""
    if tol < 0:
        raise ContractError(f"tol must be nonnegative, got {tol}")
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    _check_same_dim(x, y)
    return bool(np.all(y <= x + tol))


def join(x, y) -> np.ndarray:
    """Least upper bound (abstraction): elementwise min."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    _check_same_dim(x, y)
    return np.minimum(x, y)


def meet(x, y) -> np.ndarray:
    """Greatest lower bound (composition): elementwise max."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    _check_same_dim(x, y)
    return np.maximum(x, y)


def score(kind: Scorer, lower, upper) -> float:
    """Compatibility score of an ordered candidate pair; higher is better.

    ORDER: -penalty(lower, upper), asymmetric, max 0.
    COSINE: cosine similarity, symmetric in its arguments.
    """
    if kind is Scorer.ORDER:
        return -penalty(lower, upper)
    lower = as_vector(lower, "lower")
    upper = as_vector(upper, "upper")
    _check_same_dim(lower, upper)
    na = float(np.linalg.norm(lower))
    nb = float(np.linalg.norm(upper))
    if na < 1e-300 or nb < 1e-300:
        raise ContractError("cosine score undefined for a zero vector")
    return float(lower @ upper) / (na * nb)


def distance(kind: Scorer, lower, upper) -> float:
    """Nonnegative dissimilarity used by the max-margin losses and threshold
    classifier: the order penalty, or (1 - cosine) for the symmetric
    ablation."""
    if kind is Scorer.ORDER:
        return penalty(lower, upper)
    return 1.0 - score(kind, lower, upper)


# Batched forms used by the losses. Rows are paired elementwise.

def penalty_rows(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Penalty of each aligned row pair of two equal-shape matrices."""
    if lower.shape != upper.shape:
        raise ContractError(f"dimension mismatch: {lower.shape} vs {upper.shape}")
    diff = np.maximum(0.0, upper - lower)
    return np.einsum("ij,ij->i", diff, diff)


def penalty_rows_grad_upper(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Row-wise d penalty / d upper; negate for the lower side."""
    if lower.shape != upper.shape:
        raise ContractError(f"dimension mismatch: {lower.shape} vs {upper.shape}")
    return 2.0 * np.maximum(0.0, upper - lower)


def cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosine similarity of each aligned row pair."""
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na < 1e-300) or np.any(nb < 1e-300):
        raise ContractError("cosine undefined for a zero vector")
    return np.einsum("ij,ij->i", a, b) / (na * nb)


def cosine_rows_grads(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise gradients of cosine similarity w.r.t. both sides."""
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    if np.any(na < 1e-300) or np.any(nb < 1e-300):
        raise ContractError("cosine undefined for a zero vector")
    cos = (np.einsum("ij,ij->i", a, b) / (na[:, 0] * nb[:, 0]))[:, None]
    da = b / (na * nb) - cos * a / (na * na)
    db = a / (na * nb) - cos * b / (nb * nb)
    return da, db


def score_matrix(kind: Scorer, lower: np.ndarray, upper: np.ndarray,
                 threads: int = 1) -> np.ndarray:
    """All-pairs score matrix S[i, j] of lower rows against upper rows.

    ORDER scores are -penalty; COSINE scores are cosine similarities. With
    threads > 1 the row blocks are computed in a thread pool (the kernels
    release the GIL); output is identical either way.
    """
    lower = np.ascontiguousarray(lower, dtype=np.float64)
    upper = np.ascontiguousarray(upper, dtype=np.float64)
    if lower.ndim != 2 or upper.ndim != 2 or lower.shape[1] != upper.shape[1]:
        raise ContractError(
            f"score_matrix needs matrices with equal column counts, got "
            f"{lower.shape} and {upper.shape}"
        )
    if kind is Scorer.COSINE:
        na = np.linalg.norm(lower, axis=1, keepdims=True)
        nb = np.linalg.norm(upper, axis=1, keepdims=True)
        if np.any(na < 1e-300) or np.any(nb < 1e-300):
            raise ContractError("cosine undefined for a zero vector")
        return (lower / na) @ (upper / nb).T
    if threads <= 1 or lower.shape[0] < 2 * threads:
        return -kernels.penalty_matrix(lower, upper)
    from concurrent.futures import ThreadPoolExecutor

    out = np.empty((lower.shape[0], upper.shape[0]), dtype=np.float64)
    bounds = np.linspace(0, lower.shape[0], threads + 1, dtype=int)

    def fill(k):
        i0, i1 = bounds[k], bounds[k + 1]
        out[i0:i1] = -kernels.penalty_matrix(lower[i0:i1], upper)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(fill, range(threads)))
    return out
