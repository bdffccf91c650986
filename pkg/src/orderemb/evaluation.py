"""Threshold-tuned binary classification and ranking metrics.

Ranking uses descending score with stable ties (the lower candidate index
wins), so results are independent of evaluation order. Binary classification
uses the rule `positive iff dissimilarity <= threshold`, with the threshold
chosen on a dev set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError

logger = logging.getLogger("orderemb")

__all__ = [
    "ScoredPair",
    "RankResult",
    "LengthContrastResult",
    "tune_threshold",
    "binary_accuracy",
    "rank_targets",
    "average_rank_results",
    "five_fold_1k",
    "select_length_contrast_pairs",
    "length_contrast",
    "write_report",
    "read_report",
]

RECALL_KS = (1, 5, 10)


@dataclass
class ScoredPair:
    """A classified pair: its nonnegative dissimilarity and gold label."""

    penalty: float
    label: bool


@dataclass
class RankResult:
    """Per-query ranks (1-based) and the derived retrieval metrics."""

    ranks: np.ndarray | None
    recall: dict[int, float]
    median_rank: float
    mean_rank: float


@dataclass
class LengthContrastResult:
    n_pairs: int
    short_query_mean_rank: float
    long_query_mean_rank: float
    caption_mean_rank: float


def tune_threshold(dev: list[ScoredPair]) -> float:
    """Threshold maximizing dev accuracy under `positive iff penalty <= t`.

    Candidates are midpoints of consecutive distinct sorted penalties plus
    -inf/+inf sentinels; ties in accuracy resolve toward the smallest
    threshold.
    """
    if not dev:
        raise ContractError("cannot tune a threshold on an empty dev set")
    labels = np.array([p.label for p in dev], dtype=bool)
    if labels.all() or not labels.any():
        raise ContractError("dev set must contain both labels")
    pens = np.array([p.penalty for p in dev], dtype=np.float64)
    order = np.argsort(pens, kind="stable")
    pens_sorted = pens[order]
    labels_sorted = labels[order]

    distinct = np.unique(pens_sorted)
    candidates = np.concatenate((
        [-np.inf],
        (distinct[:-1] + distinct[1:]) / 2.0,
        [np.inf],
    ))
    # correct(t) = positives with penalty <= t  +  negatives with penalty > t
    pos_cum = np.cumsum(labels_sorted)
    neg_cum = np.cumsum(~labels_sorted)
    total_neg = int(neg_cum[-1])
    counts = np.searchsorted(pens_sorted, candidates, side="right")
    correct = np.where(counts > 0, pos_cum[np.maximum(counts - 1, 0)], 0) \
        + total_neg - np.where(counts > 0, neg_cum[np.maximum(counts - 1, 0)], 0)
    best = int(np.argmax(correct))  # argmax takes the first = smallest candidate
    return float(candidates[best])


def binary_accuracy(test: list[ScoredPair], threshold: float) -> float:
    """Percentage of pairs classified correctly at the given threshold."""
    if not test:
        raise ContractError("cannot score an empty test set")
    correct = sum(1 for p in test if (p.penalty <= threshold) == p.label)
    return 100.0 * correct / len(test)


def rank_targets(score_matrix: np.ndarray, gt: list[set[int]] | dict[int, set[int]],
                 ks: tuple[int, ...] = RECALL_KS) -> RankResult:
    """Rank ground-truth candidates for each query row of a score matrix.

    Candidates are sorted by descending score, stable in the original index;
    a query's rank is the 1-based position of its best-ranked ground-truth
    candidate. Recall@K is the percentage of queries with rank <= K.
    """
    scores = np.asarray(score_matrix, dtype=np.float64)
    if scores.ndim != 2:
        raise ContractError(f"score matrix must be 2-D, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ContractError("score matrix contains non-finite values")
    n_q, n_c = scores.shape
    gt_map = gt if isinstance(gt, dict) else dict(enumerate(gt))
    ranks = np.empty(n_q, dtype=np.int64)
    for q in range(n_q):
        targets = gt_map.get(q)
        if not targets:
            raise ContractError(f"query {q} has an empty ground-truth set")
        order = np.argsort(-scores[q], kind="stable")
        pos = np.empty(n_c, dtype=np.int64)
        pos[order] = np.arange(1, n_c + 1)
        ranks[q] = min(pos[t] for t in targets)
    recall = {k: 100.0 * float(np.mean(ranks <= k)) for k in ks}
    return RankResult(
        ranks=ranks,
        recall=recall,
        median_rank=float(np.median(ranks)),
        mean_rank=float(np.mean(ranks)),
    )


def average_rank_results(results: list[RankResult]) -> RankResult:
    """Arithmetic mean of each metric across folds; per-query ranks dropped."""
    if not results:
        raise ContractError("nothing to average")
    ks = results[0].recall.keys()
    return RankResult(
        ranks=None,
        recall={k: float(np.mean([r.recall[k] for r in results])) for k in ks},
        median_rank=float(np.mean([r.median_rank for r in results])),
        mean_rank=float(np.mean([r.mean_rank for r in results])),
    )


def five_fold_1k(score_matrix: np.ndarray, caption_image: np.ndarray,
                 fold_size: int = 1000, ks: tuple[int, ...] = RECALL_KS
                 ) -> dict[str, RankResult]:
    """Retrieval metrics averaged over contiguous image folds.

    ``score_matrix`` is captions x images (higher is better); ``caption_image``
    maps each caption row to its image column. Images are cut into contiguous
    folds of ``fold_size``; each fold is evaluated independently with only its
    own captions and images, and the metrics are arithmetically averaged.
    """
    scores = np.asarray(score_matrix, dtype=np.float64)
    caption_image = np.asarray(caption_image)
    n_cap, n_img = scores.shape
    if caption_image.shape != (n_cap,):
        raise ContractError("caption_image must map every caption row to an image")
    if n_img % fold_size != 0:
        raise ContractError(
            f"{n_img} images do not divide into folds of {fold_size}"
        )
    cap_results = []
    img_results = []
    for f0 in range(0, n_img, fold_size):
        img_idx = np.arange(f0, f0 + fold_size)
        cap_idx = np.where((caption_image >= f0) & (caption_image < f0 + fold_size))[0]
        if cap_idx.size == 0:
            raise ContractError(f"fold starting at image {f0} has no captions")
        sub = scores[np.ix_(cap_idx, img_idx)]
        local_img = caption_image[cap_idx] - f0
        # image retrieval: caption queries, the aligned image is the target
        img_results.append(rank_targets(sub, [{int(i)} for i in local_img], ks))
        # caption retrieval: image queries, any co-referring caption counts
        by_img: list[set[int]] = [set() for _ in range(fold_size)]
        for c, i in enumerate(local_img):
            by_img[int(i)].add(c)
        cap_results.append(rank_targets(sub.T, by_img, ks))
    return {
        "caption_retrieval": average_rank_results(cap_results),
        "image_retrieval": average_rank_results(img_results),
    }


def select_length_contrast_pairs(lengths: list[int], caption_image: np.ndarray,
                                 top_n: int) -> list[tuple[int, int]]:
    """Top co-referring (short, long) caption index pairs by length gap.

    Pairs are ordered by descending absolute token-length difference, then by
    image id order and caption indices so ties are deterministic.
    """
    caption_image = np.asarray(caption_image)
    groups: dict[int, list[int]] = {}
    for c, img in enumerate(caption_image):
        groups.setdefault(int(img), []).append(c)
    pairs = []
    for img in sorted(groups):
        caps = groups[img]
        for a in range(len(caps)):
            for b in range(a + 1, len(caps)):
                i, j = caps[a], caps[b]
                if lengths[i] > lengths[j]:
                    i, j = j, i
                pairs.append((abs(lengths[i] - lengths[j]), img, i, j))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2], t[3]))
    if len(pairs) < top_n:
        logger.warning(
            "only %d co-referring caption pairs available (asked for %d); using all",
            len(pairs), top_n,
        )
    return [(i, j) for _, _, i, j in pairs[:top_n]]


def length_contrast(caption_scores: np.ndarray, caption_caption_scores: np.ndarray,
                    lengths: list[int], caption_image: np.ndarray,
                    top_n: int = 100) -> LengthContrastResult:
    """Retrieval behavior on the caption pairs with the biggest length gap.

    ``caption_scores`` is the captions x images score matrix;
    ``caption_caption_scores[q, c]`` scores candidate caption c for query
    caption q (the diagonal is ignored: a query never retrieves itself).
    Reports the image-retrieval mean rank using the short and the long
    caption of each selected pair, and the mean rank of the long caption when
    the short one queries the caption pool.
    """
    caption_image = np.asarray(caption_image)
    sel = select_length_contrast_pairs(lengths, caption_image, top_n)
    if not sel:
        raise ContractError("no co-referring caption pairs to contrast")
    short_ranks = []
    long_ranks = []
    cross_ranks = []
    n_cap = caption_scores.shape[0]
    for short_idx, long_idx in sel:
        gt = {0: {int(caption_image[short_idx])}}
        short_ranks.append(rank_targets(caption_scores[[short_idx]], gt).ranks[0])
        gt = {0: {int(caption_image[long_idx])}}
        long_ranks.append(rank_targets(caption_scores[[long_idx]], gt).ranks[0])
        row = caption_caption_scores[short_idx].copy()
        keep = np.arange(n_cap) != short_idx
        sub = row[keep][None, :]
        target = int(np.searchsorted(np.where(keep)[0], long_idx))
        cross_ranks.append(rank_targets(sub, {0: {target}}).ranks[0])
    return LengthContrastResult(
        n_pairs=len(sel),
        short_query_mean_rank=float(np.mean(short_ranks)),
        long_query_mean_rank=float(np.mean(long_ranks)),
        caption_mean_rank=float(np.mean(cross_ranks)),
    )


def write_report(path, metrics: dict[str, float]) -> None:
    """Machine-readable `metric<TAB>value` report, one line per metric."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in metrics.items():
            fh.write(f"{key}\t{value!r}\n")


def read_report(path) -> dict[str, float]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition("\t")
            out[key] = float(value)
    return out
