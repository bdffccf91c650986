import numpy as np
import pytest

from orderemb.errors import ContractError
from orderemb.evaluation import (
    LengthContrastResult,
    RankResult,
    ScoredPair,
    average_rank_results,
    binary_accuracy,
    five_fold_1k,
    length_contrast,
    rank_targets,
    read_report,
    select_length_contrast_pairs,
    tune_threshold,
    write_report,
)


def accuracy_oracle(pairs, threshold):
    return 100.0 * np.mean([(p.penalty <= threshold) == p.label for p in pairs])


def best_accuracy_oracle(pairs):
    """Exhaustive scan over every distinct penalty and the two extremes."""
    cands = sorted({p.penalty for p in pairs}) + [np.inf]
    cands = [-np.inf] + cands
    return max(accuracy_oracle(pairs, t) for t in cands)


def rank_oracle(scores, gt):
    """Sort-and-scan ranking oracle with explicit stable tie handling."""
    order = sorted(range(len(scores)), key=lambda c: (-scores[c], c))
    return min(order.index(t) + 1 for t in gt)


def test_tune_threshold_separable():
    dev = [ScoredPair(0.1, True)] * 3 + [ScoredPair(0.9, False)] * 3
    t = tune_threshold(dev)
    assert t == pytest.approx(0.5)
    assert binary_accuracy(dev, t) == 100.0


def test_tune_threshold_four_pair_example():
    dev = [ScoredPair(0.2, True), ScoredPair(0.4, False),
           ScoredPair(0.3, True), ScoredPair(0.1, False)]
    t = tune_threshold(dev)
    assert 0.3 < t < 0.4
    assert binary_accuracy(dev, t) == 75.0


def test_tune_threshold_identical_penalties_gives_majority():
    dev = [ScoredPair(0.5, True)] * 2 + [ScoredPair(0.5, False)] * 5
    t = tune_threshold(dev)
    assert binary_accuracy(dev, t) == pytest.approx(100.0 * 5 / 7)


def test_tune_threshold_single_class_rejected():
    with pytest.raises(ContractError):
        tune_threshold([ScoredPair(0.1, True)])
    with pytest.raises(ContractError):
        tune_threshold([ScoredPair(0.1, True), ScoredPair(0.2, True)])


def test_tune_threshold_matches_exhaustive_oracle():
    rng = np.random.default_rng(21)
    for _ in range(80):
        n = int(rng.integers(2, 40))
        pairs = [ScoredPair(float(rng.choice([0.1, 0.2, 0.3, 0.5, 0.9])),
                            bool(rng.integers(2))) for _ in range(n)]
        if all(p.label for p in pairs) or not any(p.label for p in pairs):
            continue
        t = tune_threshold(pairs)
        assert binary_accuracy(pairs, t) == pytest.approx(best_accuracy_oracle(pairs))


def test_binary_accuracy_infinite_threshold():
    pairs = [ScoredPair(0.3, True), ScoredPair(0.1, False), ScoredPair(0.9, True)]
    assert binary_accuracy(pairs, np.inf) == pytest.approx(100.0 * 2 / 3)


def test_rank_targets_identity_scores():
    scores = np.eye(5)
    res = rank_targets(scores, [{i} for i in range(5)])
    assert res.recall[1] == 100.0
    assert res.median_rank == 1.0 and res.mean_rank == 1.0


def test_rank_targets_two_query_example():
    # query 0 ranks its target first; query 1 ranks its target fourth
    scores = np.array([
        [9.0, 1.0, 2.0, 3.0],
        [9.0, 8.0, 7.0, 5.0],
    ])
    res = rank_targets(scores, [{0}, {3}])
    assert list(res.ranks) == [1, 4]
    assert res.recall[1] == 50.0
    assert res.median_rank == 2.5 and res.mean_rank == 2.5


def test_rank_targets_stable_ties_prefer_lower_index():
    scores = np.array([[1.0, 1.0, 1.0]])
    assert rank_targets(scores, [{0}]).ranks[0] == 1
    assert rank_targets(scores, [{1}]).ranks[0] == 2
    assert rank_targets(scores, [{2}]).ranks[0] == 3


def test_rank_targets_best_gt_counts():
    scores = np.array([[0.1, 0.9, 0.5]])
    assert rank_targets(scores, [{0, 1}]).ranks[0] == 1  # best GT is ranked 1st


def test_rank_targets_empty_gt_rejected():
    with pytest.raises(ContractError):
        rank_targets(np.ones((1, 3)), [set()])


def test_rank_targets_matches_bruteforce_with_ties():
    rng = np.random.default_rng(22)
    for _ in range(200):
        q = int(rng.integers(1, 6))
        c = int(rng.integers(1, 21))
        scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=(q, c))
        gt = [set(rng.choice(c, size=int(rng.integers(1, min(c, 4) + 1)),
                             replace=False).tolist()) for _ in range(q)]
        res = rank_targets(scores, gt)
        for i in range(q):
            assert res.ranks[i] == rank_oracle(scores[i], gt[i])


def test_rank_metrics_monotone_and_invariant_under_monotone_transform():
    rng = np.random.default_rng(23)
    scores = rng.normal(size=(30, 40))
    gt = [{int(rng.integers(40))} for _ in range(30)]
    res = rank_targets(scores, gt)
    assert res.recall[1] <= res.recall[5] <= res.recall[10]
    assert res.mean_rank >= 1.0 and res.median_rank >= 1.0
    transformed = rank_targets(np.exp(scores * 0.5) + 3.0, gt)
    np.testing.assert_array_equal(res.ranks, transformed.ranks)


def test_average_rank_results_plain_mean():
    rs = [RankResult(None, {1: r1, 5: r1, 10: r1}, m, m)
          for r1, m in [(10.0, 1.0), (20.0, 2.0), (30.0, 3.0), (40.0, 4.0), (50.0, 5.0)]]
    avg = average_rank_results(rs)
    assert avg.recall[1] == 30.0
    assert avg.mean_rank == 3.0


def test_five_fold_identical_folds_equal_single_fold():
    rng = np.random.default_rng(24)
    fold_scores = rng.normal(size=(6, 3))
    scores = np.zeros((30, 15))
    cap_img = np.zeros(30, dtype=int)
    for f in range(5):
        scores[6 * f:6 * f + 6, 3 * f:3 * f + 3] = fold_scores
        # -inf outside the fold so cross-fold candidates never interfere
        cap_img[6 * f:6 * f + 6] = 3 * f + np.array([0, 0, 1, 1, 2, 2])
    res = five_fold_1k(scores, cap_img, fold_size=3)
    single_img = rank_targets(fold_scores, [{0}, {0}, {1}, {1}, {2}, {2}])
    assert res["image_retrieval"].mean_rank == pytest.approx(single_img.mean_rank)
    assert res["image_retrieval"].recall[1] == pytest.approx(single_img.recall[1])


def test_five_fold_matches_per_fold_recompute():
    rng = np.random.default_rng(25)
    n_img, per = 20, 2
    scores = rng.normal(size=(n_img * per, n_img))
    cap_img = np.repeat(np.arange(n_img), per)
    res = five_fold_1k(scores, cap_img, fold_size=4)
    img_folds = []
    for f0 in range(0, n_img, 4):
        caps = np.where((cap_img >= f0) & (cap_img < f0 + 4))[0]
        sub = scores[np.ix_(caps, np.arange(f0, f0 + 4))]
        img_folds.append(rank_targets(sub, [{int(i - f0)} for i in cap_img[caps]]))
    manual = average_rank_results(img_folds)
    assert res["image_retrieval"].mean_rank == pytest.approx(manual.mean_rank)
    assert res["image_retrieval"].recall[10] == pytest.approx(manual.recall[10])


def test_five_fold_rejects_nondivisible():
    with pytest.raises(ContractError):
        five_fold_1k(np.ones((4, 10)), np.zeros(4, dtype=int), fold_size=3)


def test_select_length_contrast_ties_break_by_image_order():
    # all captions the same length: differences are all zero, image id decides
    lengths = [3, 3, 3, 3]
    cap_img = np.array([1, 1, 0, 0])
    pairs = select_length_contrast_pairs(lengths, cap_img, top_n=2)
    assert pairs == [(2, 3), (0, 1)]


def test_select_length_contrast_prefers_biggest_gap():
    lengths = [2, 10, 4, 5]
    cap_img = np.array([0, 0, 1, 1])
    pairs = select_length_contrast_pairs(lengths, cap_img, top_n=1)
    assert pairs == [(0, 1)]


def test_select_length_contrast_warns_when_short(caplog):
    import logging

    with caplog.at_level(logging.WARNING, logger="orderemb"):
        pairs = select_length_contrast_pairs([1, 2], np.array([0, 0]), top_n=10)
    assert pairs == [(0, 1)]
    assert any("using all" in r.message for r in caplog.records)


def test_length_contrast_mechanics():
    # 2 images, 2 captions each; short captions are index 0 and 2
    lengths = [2, 6, 3, 9]
    cap_img = np.array([0, 0, 1, 1])
    cap_scores = np.array([
        [1.0, 0.0],   # caption 0 ranks image 0 first
        [0.0, 1.0],   # caption 1 ranks image 0 second
        [0.0, 1.0],   # caption 2 ranks image 1 first
        [1.0, 0.0],   # caption 3 ranks image 1 second
    ])
    cc = np.array([
        [9.0, 0.5, 0.1, 0.3],
        [0.0, 9.0, 0.0, 0.0],
        [0.9, 0.2, 9.0, 0.4],
        [0.0, 0.0, 0.0, 9.0],
    ])
    res = length_contrast(cap_scores, cc, lengths, cap_img, top_n=2)
    assert isinstance(res, LengthContrastResult)
    assert res.n_pairs == 2
    # short queries: captions 2 (rank 1) and 0 (rank 1)
    assert res.short_query_mean_rank == pytest.approx(1.0)
    # long queries: captions 3 (rank 2) and 1 (rank 2)
    assert res.long_query_mean_rank == pytest.approx(2.0)
    # caption-by-caption: query 2 -> target 3 ranked 2nd among (0,1,3);
    # query 0 -> target 1 ranked 1st among (1,2,3)
    assert res.caption_mean_rank == pytest.approx(1.5)


def test_report_roundtrip(tmp_path):
    path = tmp_path / "metrics.tsv"
    metrics = {"accuracy": 75.0, "threshold": 0.3527}
    write_report(path, metrics)
    assert read_report(path) == metrics
    text = path.read_text(encoding="utf-8")
    assert "accuracy\t75.0" in text
