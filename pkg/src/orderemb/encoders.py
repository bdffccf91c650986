"""Encoders into the nonnegative orthant.

Every encoder output is made nonnegative by taking an elementwise absolute
value at the end of the forward pass (differentiable almost everywhere, with
sign(0) taken as 0), optionally followed by L2 normalization with gradient
flow through it. Covers: per-id embedding tables (concepts, words), a linear
projection for precomputed image features, and a gated recurrent sentence
encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError, DataFormatError, NumericError
from .numerics import Rng

__all__ = [
    "UNK_TOKEN",
    "Vocabulary",
    "EmbeddingTable",
    "LinearProjection",
    "GruEncoder",
    "init_uniform",
    "init_glorot",
    "abs_normalize",
    "abs_normalize_backward",
]

UNK_TOKEN = "<unk>"

_NORM_FLOOR = 1e-12

GRU_TENSOR_NAMES = ("Wz", "Wr", "Wh", "Uz", "Ur", "Uh", "bz", "br", "bh")


def init_uniform(rng: Rng, rows: int, cols: int, scale: float = 0.1) -> np.ndarray:
    """Embedding-table initializer: Uniform(-scale, scale)."""
    return rng.uniform(-scale, scale, (rows, cols))


def init_glorot(rng: Rng, rows: int, cols: int) -> np.ndarray:
    """Fan-balanced Uniform(+-sqrt(6/(fan_in+fan_out))) for dense weights."""
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, (rows, cols))


class Vocabulary:
    """Token-to-id map with a reserved unknown token at id 0."""

    def __init__(self, tokens: list[str]):
        if not tokens or tokens[0] != UNK_TOKEN:
            raise ContractError(f"vocabulary must start with {UNK_TOKEN!r} at id 0")
        if len(set(tokens)) != len(tokens):
            raise ContractError("vocabulary contains duplicate tokens")
        self.tokens = list(tokens)
        self._ids = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id(self, token: str) -> int:
        """Id of the token, or 0 (the unknown id) if unseen."""
        return self._ids.get(token, 0)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self._ids.get(t, 0) for t in tokens]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t in self.tokens:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        tokens = [t for t in tokens if t]
        if not tokens or tokens[0] != UNK_TOKEN:
            raise DataFormatError(f"{path}: line 0 must be the literal token {UNK_TOKEN!r}")
        return cls(tokens)

    @classmethod
    def from_counts(cls, counts: dict[str, int], min_count: int = 1) -> "Vocabulary":
        """Frequency-sorted vocabulary (count desc, then token asc)."""
        kept = [t for t, c in counts.items() if c >= min_count and t != UNK_TOKEN]
        kept.sort(key=lambda t: (-counts[t], t))
        return cls([UNK_TOKEN] + kept)


def abs_normalize(raw: np.ndarray, normalize: bool):
    """Elementwise |raw|, optionally scaled to unit L2 norm.

    Returns (output, cache) where cache feeds abs_normalize_backward.
    Raises NumericError if normalization is requested on a ~zero vector.
    """
    u = np.abs(raw)
    if not normalize:
        return u, (raw, None, None)
    n = float(np.linalg.norm(u))
    if n < _NORM_FLOOR:
        raise NumericError("cannot normalize a zero-norm embedding")
    y = u / n
    return y, (raw, y, n)


def abs_normalize_backward(d_out: np.ndarray, cache) -> np.ndarray:
    """Gradient w.r.t. the pre-abs raw vector."""
    raw, y, n = cache
    if y is None:
        du = d_out
    else:
        du = (d_out - y * float(y @ d_out)) / n
    return du * np.sign(raw)


class EmbeddingTable:
    """Learnable per-id vectors; the effective embedding of id k is the
    elementwise absolute value of stored row k."""

    def __init__(self, weights: np.ndarray):
        if weights.ndim != 2:
            raise ContractError(f"embedding table must be 2-D, got {weights.shape}")
        self.weights = weights

    @classmethod
    def create(cls, rng: Rng, vocab_size: int, dim: int) -> "EmbeddingTable":
        return cls(init_uniform(rng, vocab_size, dim))

    @property
    def vocab_size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def lookup(self, idx: int) -> np.ndarray:
        if not 0 <= idx < self.vocab_size:
            raise ContractError(f"id {idx} out of range for table of {self.vocab_size}")
        return np.abs(self.weights[idx])

    def lookup_many(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            raise ContractError(f"ids out of range for table of {self.vocab_size}")
        return np.abs(self.weights[ids])

    def accumulate_grad(self, grad_table: np.ndarray, ids: np.ndarray,
                        d_out: np.ndarray) -> None:
        """Scatter-add d_out (rows aligned with ids) into the stored-weight
        gradient, chaining through the absolute value."""
        np.add.at(grad_table, ids, d_out * np.sign(self.weights[ids]))


class LinearProjection:
    """|W . feat| with optional unit-norm output; maps fixed feature vectors
    into the embedding space."""

    def __init__(self, W: np.ndarray, normalize: bool):
        self.W = W
        self.normalize = normalize

    @classmethod
    def create(cls, rng: Rng, dim_out: int, dim_in: int, normalize: bool) -> "LinearProjection":
        return cls(init_glorot(rng, dim_out, dim_in), normalize)

    def project(self, feat: np.ndarray) -> np.ndarray:
        out, _ = self.project_with_cache(feat)
        return out

    def project_with_cache(self, feat: np.ndarray):
        feat = np.asarray(feat, dtype=np.float64)
        if feat.shape != (self.W.shape[1],):
            raise ContractError(
                f"feature dim {feat.shape} does not match projection input {self.W.shape[1]}"
            )
        raw = self.W @ feat
        out, cache = abs_normalize(raw, self.normalize)
        return out, (feat, cache)

    def project_batch(self, feats: np.ndarray):
        """Row-wise projection of a (n, dim_in) feature block."""
        if feats.ndim != 2 or feats.shape[1] != self.W.shape[1]:
            raise ContractError(
                f"feature block {feats.shape} does not match projection input "
                f"{self.W.shape[1]}"
            )
        raw = feats @ self.W.T
        u = np.abs(raw)
        if not self.normalize:
            return u, (feats, raw, None, None)
        norms = np.linalg.norm(u, axis=1, keepdims=True)
        if np.any(norms < _NORM_FLOOR):
            raise NumericError("cannot normalize a zero-norm embedding")
        y = u / norms
        return y, (feats, raw, y, norms)

    def backward_batch(self, d_out: np.ndarray, cache) -> np.ndarray:
        """Gradient w.r.t. W for a batched projection."""
        feats, raw, y, norms = cache
        if y is None:
            du = d_out
        else:
            du = (d_out - y * np.einsum("ij,ij->i", y, d_out)[:, None]) / norms
        d_raw = du * np.sign(raw)
        return d_raw.T @ feats


@dataclass
class GruEncoder:
    """Gated recurrent sentence encoder.

    Recurrence, left to right from h_0 = 0 over word embeddings x_t:
        z = sigmoid(Wz x_t + Uz h + bz)
        r = sigmoid(Wr x_t + Ur h + br)
        c = tanh(Wh x_t + Uh (r * h) + bh)
        h <- (1 - z) * h + z * c
    The sentence embedding is |h_T|, unit-normalized when ``normalize``.
    """

    word_table: EmbeddingTable
    weights: dict[str, np.ndarray]
    normalize: bool

    @classmethod
    def create(cls, rng: Rng, vocab_size: int, word_dim: int, hidden: int,
               normalize: bool) -> "GruEncoder":
        table = EmbeddingTable.create(rng, vocab_size, word_dim)
        weights = {}
        for name in ("Wz", "Wr", "Wh"):
            weights[name] = init_glorot(rng, hidden, word_dim)
        for name in ("Uz", "Ur", "Uh"):
            weights[name] = init_glorot(rng, hidden, hidden)
        for name in ("bz", "br", "bh"):
            weights[name] = np.zeros(hidden, dtype=np.float64)
        return cls(word_table=table, weights=weights, normalize=normalize)

    @property
    def hidden(self) -> int:
        return self.weights["bz"].shape[0]

    def _w(self):
        return tuple(self.weights[n] for n in GRU_TENSOR_NAMES)

    def encode(self, tokens) -> np.ndarray:
        out, _ = self.encode_with_cache(tokens)
        return out

    def encode_with_cache(self, tokens):
        ids = np.asarray(tokens, dtype=np.intp)
        if ids.size == 0:
            raise ContractError("cannot encode an empty token sequence")
        X = self.word_table.lookup_many(ids)
        h_all, z_all, r_all, c_all = kernels.gru_forward(*self._w(), X)
        out, an_cache = abs_normalize(h_all[-1], self.normalize)
        return out, (ids, X, h_all, z_all, r_all, c_all, an_cache)

    def backward(self, d_out: np.ndarray, cache, grads: dict[str, np.ndarray],
                 word_grad: np.ndarray) -> None:
        """Accumulate gradients for one encoded sequence.

        ``grads`` maps the recurrence tensor names to accumulators matching
        ``self.weights``; ``word_grad`` matches the stored word table.
        """
        ids, X, h_all, z_all, r_all, c_all, an_cache = cache
        d_h_last = abs_normalize_backward(d_out, an_cache)
        res = kernels.gru_backward(*self._w(), X, h_all, z_all, r_all, c_all,
                                   np.ascontiguousarray(d_h_last))
        dX = res[0]
        for name, g in zip(GRU_TENSOR_NAMES, res[1:]):
            grads[name] += g
        self.word_table.accumulate_grad(word_grad, ids, dX)
