"""Max-margin losses with analytic gradients, the training configuration,
and the early-stopping epoch loop.

All three losses share one convention: the more specific item of an ordered
pair (hyponym, image, premise) is the *lower* argument. Positives are pushed
to zero dissimilarity; negatives are pushed beyond the margin. Margins are in
squared-penalty units for the order scorer and in (1 - cosine) units for the
symmetric ablation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import kernels
from .errors import ContractError, DataFormatError, NumericError
from .order import (
    Scorer,
    cosine_rows,
    cosine_rows_grads,
    penalty_rows,
    penalty_rows_grad_upper,
)

__all__ = [
    "TrainConfig",
    "Checkpoint",
    "hypernym_loss",
    "entailment_loss",
    "ranking_loss",
    "run_epochs",
]

_TASKS = ("hypernym", "retrieval", "entailment")


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    ``batch`` counts positive pairs for the hypernym task (each is corrupted
    once, doubling the examples seen) and whole examples otherwise. For the
    retrieval task the minibatch supplies its own contrastive terms, so
    ``batch`` must be at least 2 there. ``normalize`` applies to the caption,
    image, and sentence encoders; the hypernym lookup table is never
    normalized. ``clip_norm`` = 0 disables gradient clipping.
    """

    task: str = "hypernym"
    dim: int = 50
    margin: float = 1.0
    lr: float = 0.01
    batch: int = 500
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    normalize: bool = False
    scorer: Scorer = Scorer.ORDER
    word_dim: int = 50
    clip_norm: float = 0.0
    reverse_order: bool = False

    def __post_init__(self):
        if self.task not in _TASKS:
            raise ContractError(f"unknown task {self.task!r}; expected one of {_TASKS}")
        if self.margin <= 0:
            raise ContractError(f"margin must be positive, got {self.margin}")
        if self.lr <= 0:
            raise ContractError(f"learning rate must be positive, got {self.lr}")
        if self.dim < 1 or self.word_dim < 1:
            raise ContractError("embedding dimensions must be positive")
        if self.batch < 1:
            raise ContractError(f"batch must be positive, got {self.batch}")
        if self.task == "retrieval" and self.batch < 2:
            raise ContractError("retrieval batches supply their own contrastives; batch >= 2")
        if self.max_epochs < 1 or self.patience < 1:
            raise ContractError("max_epochs and patience must be >= 1")
        if isinstance(self.scorer, str):
            self.scorer = Scorer(self.scorer)

    @classmethod
    def from_file(cls, path, **overrides) -> "TrainConfig":
        """Parse a `key = value` config file; keyword overrides win."""
        values: dict = {}
        names = {f.name for f in fields(cls)}
        with open(path, encoding="utf-8") as fh:
            for ln, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataFormatError(f"{path}:{ln}: expected `key = value`, got {line!r}")
                key, _, raw = line.partition("=")
                key = key.strip()
                if key not in names:
                    raise DataFormatError(f"{path}:{ln}: unknown config key {key!r}")
                values[key] = _coerce(cls, key, raw.strip(), f"{path}:{ln}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def updated(self, **overrides) -> "TrainConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, Scorer) else repr(v) if isinstance(v, float) else str(v)
        return out


def _coerce(cls, key: str, raw: str, where: str):
    ftype = {f.name: f.type for f in fields(cls)}[key]
    try:
        if ftype == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "Scorer":
            return Scorer(raw)
        return raw
    except ValueError as exc:
        raise DataFormatError(f"{where}: bad value {raw!r} for {key}") from exc


def config_from_strings(values: dict[str, str]) -> TrainConfig:
    """Rebuild a TrainConfig from the string form stored in checkpoints."""
    out = {}
    for key, raw in values.items():
        out[key] = _coerce(TrainConfig, key, raw, "checkpoint config")
    return TrainConfig(**out)


@dataclass
class Checkpoint:
    """Named-tensor snapshot of all learnable parameters plus run metadata."""

    task: str
    config: dict[str, str]
    epoch: int
    dev_metric: float
    tensors: dict[str, np.ndarray]

    def copy(self) -> "Checkpoint":
        return Checkpoint(
            task=self.task, config=dict(self.config), epoch=self.epoch,
            dev_metric=self.dev_metric,
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )


def _pair_loss(pos_lower, pos_upper, neg_lower, neg_upper, margin, scorer):
    """Shared body of the hypernym and entailment losses.

    Either side may be empty (its sum is then zero) but not both; empty
    inputs must still be shaped (0, dim).
    """
    if margin <= 0:
        raise ContractError(f"margin must be positive, got {margin}")
    for a, b in ((pos_lower, pos_upper), (neg_lower, neg_upper)):
        if a.ndim != 2 or a.shape != b.shape:
            raise ContractError(f"pair shape mismatch: {a.shape} vs {b.shape}")
    if pos_lower.shape[0] == 0 and neg_lower.shape[0] == 0:
        raise ContractError("loss needs at least one pair")
    if pos_lower.shape[1] != neg_lower.shape[1]:
        raise ContractError(
            f"dimension mismatch: positives {pos_lower.shape[1]}, "
            f"negatives {neg_lower.shape[1]}"
        )

    if scorer is Scorer.ORDER:
        pos_d = penalty_rows(pos_lower, pos_upper)
        neg_d = penalty_rows(neg_lower, neg_upper)
        d_pos_upper = penalty_rows_grad_upper(pos_lower, pos_upper)
        d_pos_lower = -d_pos_upper
        dneg_upper = penalty_rows_grad_upper(neg_lower, neg_upper)
        dneg_lower = -dneg_upper
    else:
        pos_d = 1.0 - cosine_rows(pos_lower, pos_upper)
        neg_d = 1.0 - cosine_rows(neg_lower, neg_upper)
        ga, gb = cosine_rows_grads(pos_lower, pos_upper)
        d_pos_lower, d_pos_upper = -ga, -gb
        ga, gb = cosine_rows_grads(neg_lower, neg_upper)
        dneg_lower, dneg_upper = -ga, -gb

    hinge = margin - neg_d
    active = (hinge > 0.0).astype(np.float64)[:, None]
    loss = float(pos_d.sum() + np.maximum(0.0, hinge).sum())
    d_neg_lower = -active * dneg_lower
    d_neg_upper = -active * dneg_upper
    return loss, d_pos_lower, d_pos_upper, d_neg_lower, d_neg_upper


def hypernym_loss(pos_lower, pos_upper, neg_lower, neg_upper, margin,
                  scorer: Scorer = Scorer.ORDER):
    """Sum of positive-pair dissimilarities plus hinged negative terms.

    Rows of ``pos_lower``/``pos_upper`` are embedded (hyponym, hypernym)
    pairs; ``neg_*`` hold the corrupted pairs. Returns
    (loss, d_pos_lower, d_pos_upper, d_neg_lower, d_neg_upper).
    """
    return _pair_loss(pos_lower, pos_upper, neg_lower, neg_upper, margin, scorer)


def entailment_loss(pos_premise, pos_hypothesis, neg_premise, neg_hypothesis,
                    margin, scorer: Scorer = Scorer.ORDER):
    """Same functional form as hypernym_loss, with the premise in the lower
    position and the hypothesis upper; negatives come labeled from data."""
    return _pair_loss(pos_premise, pos_hypothesis, neg_premise, neg_hypothesis,
                      margin, scorer)


def ranking_loss(caption_embs, image_embs, margin, scorer: Scorer = Scorer.ORDER):
    """Minibatch contrastive ranking loss for aligned caption/image rows.

    Every non-aligned row serves as a contrastive term in both directions.
    Returns (loss, d_captions, d_images). To train the reversed variant
    (images above captions), swap the two arguments and the two gradients.
    """
    if caption_embs.shape != image_embs.shape:
        raise ContractError(
            f"caption/image shape mismatch: {caption_embs.shape} vs {image_embs.shape}"
        )
    if margin <= 0:
        raise ContractError(f"margin must be positive, got {margin}")
    n = caption_embs.shape[0]
    if n == 0:
        raise ContractError("ranking loss needs at least one pair")
    if n == 1:
        return 0.0, np.zeros_like(caption_embs), np.zeros_like(image_embs)

    if scorer is Scorer.ORDER:
        S = -kernels.penalty_matrix(image_embs, caption_embs)
    else:
        S = _cosine_matrix(image_embs, caption_embs)
    # S[a, b]: score of image a against caption b; diagonal = ground truth.
    diag = np.diag(S).copy()
    off = ~np.eye(n, dtype=bool)
    h1 = margin - diag[:, None] + S          # contrastive captions per image
    h2 = margin - diag[None, :] + S          # contrastive images per caption
    a1 = (h1 > 0.0) & off
    a2 = (h2 > 0.0) & off
    loss = float(h1[a1].sum() + h2[a2].sum())

    W = a1.astype(np.float64) + a2.astype(np.float64)
    np.fill_diagonal(W, -(a1.sum(axis=1) + a2.sum(axis=0)).astype(np.float64))

    if scorer is Scorer.ORDER:
        d_img, d_cap = kernels.penalty_matrix_backward(image_embs, caption_embs, -W)
    else:
        d_img, d_cap = _cosine_matrix_backward(image_embs, caption_embs, W)
    return loss, d_cap, d_img


def _cosine_matrix(a, b):
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    if np.any(na < 1e-300) or np.any(nb < 1e-300):
        raise ContractError("cosine undefined for a zero vector")
    return (a / na) @ (b / nb).T


def _cosine_matrix_backward(a, b, W):
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    ah = a / na
    bh = b / nb
    d_ah = W @ bh
    d_bh = W.T @ ah
    da = (d_ah - ah * np.einsum("ij,ij->i", ah, d_ah)[:, None]) / na
    db = (d_bh - bh * np.einsum("ij,ij->i", bh, d_bh)[:, None]) / nb
    return da, db


def run_epochs(config: TrainConfig, model, log=None) -> Checkpoint:
    """Train until the dev metric stops improving.

    ``model`` supplies ``epoch_batches(epoch)``, ``train_batch(batch) ->
    loss``, ``dev_metric() -> float`` (higher is better), and
    ``make_checkpoint(epoch, metric)``. The best checkpoint by dev metric is
    returned; training stops after ``config.patience`` epochs without strict
    improvement or at ``config.max_epochs``.
    """
    best: Checkpoint | None = None
    best_metric = -math.inf
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        losses = []
        n_batches = 0
        for bi, batch in enumerate(model.epoch_batches(epoch)):
            loss = model.train_batch(batch)
            if not math.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, batch {bi}"
                )
            losses.append(loss)
            n_batches += 1
        if n_batches == 0:
            raise ContractError("training data produced no batches")
        train_loss = float(np.mean(losses))
        metric = float(model.dev_metric())
        if log is not None:
            log(epoch, train_loss, metric)
        if metric > best_metric:
            best_metric = metric
            best = model.make_checkpoint(epoch, metric)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    assert best is not None
    return best
