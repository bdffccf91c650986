import math

import numpy as np
import pytest

from orderemb.encoders import (
    GRU_TENSOR_NAMES,
    EmbeddingTable,
    GruEncoder,
    LinearProjection,
    Vocabulary,
    abs_normalize,
    init_glorot,
    init_uniform,
)
from orderemb.errors import ContractError, DataFormatError, NumericError
from orderemb.numerics import Rng, finite_diff_check
from orderemb.order import penalty


def tiny_gru(rng, vocab=12, word_dim=3, hidden=4, normalize=True):
    enc = GruEncoder.create(rng, vocab, word_dim, hidden, normalize)
    # keep every stored weight clear of the |.| kink for finite differences
    w = enc.word_table.weights
    w += 0.05 * np.sign(w) + 0.01 * (w == 0)
    return enc


def test_lookup_absolute_value():
    table = EmbeddingTable(np.array([[-0.3, 0.5], [0.0, 0.0]]))
    np.testing.assert_array_equal(table.lookup(0), [0.3, 0.5])
    np.testing.assert_array_equal(table.lookup(1), [0.0, 0.0])


def test_lookup_out_of_range():
    table = EmbeddingTable(np.zeros((2, 2)))
    with pytest.raises(ContractError):
        table.lookup(2)
    with pytest.raises(ContractError):
        table.lookup_many(np.array([0, 5]))


def test_lookup_gradient_through_abs_matches_finite_differences():
    rng = Rng(3)
    weights = init_uniform(rng, 4, 5)
    weights += 0.02 * np.sign(weights)  # stay away from the kink

    def loss_of(flat):
        table = EmbeddingTable(flat.reshape(4, 5))
        return penalty(table.lookup(0), table.lookup(1))

    table = EmbeddingTable(weights)
    ga, gb = _penalty_grads_pair(table, 0, 1)
    grad = np.zeros_like(weights)
    table.accumulate_grad(grad, np.array([0]), ga[None, :])
    table.accumulate_grad(grad, np.array([1]), gb[None, :])
    mask = np.zeros(weights.shape, dtype=bool)
    # coordinates where the penalty max(0, y-x) sits near its own kink
    diff = np.abs(table.lookup(1) - table.lookup(0))
    mask[0] = diff < 1e-4
    mask[1] = diff < 1e-4
    err = finite_diff_check(lambda f: loss_of(f), grad, weights, skip=mask)
    assert err < 1e-4


def _penalty_grads_pair(table, i, j):
    from orderemb.order import penalty_grads

    return penalty_grads(table.lookup(i), table.lookup(j))


def test_projection_identity_passthrough():
    proj = LinearProjection(np.eye(2), normalize=False)
    np.testing.assert_array_equal(proj.project(np.array([-1.0, 2.0])), [1.0, 2.0])


def test_projection_normalized_output_is_unit():
    rng = Rng(4)
    proj = LinearProjection.create(rng, 6, 9, normalize=True)
    out = proj.project(rng.uniform(-1, 1, 9))
    assert abs(np.linalg.norm(out) - 1.0) < 1e-9
    assert np.all(out >= 0)


def test_projection_zero_norm_rejected():
    proj = LinearProjection(np.zeros((3, 3)), normalize=True)
    with pytest.raises(NumericError):
        proj.project(np.ones(3))


def test_projection_batch_gradient_matches_finite_differences():
    rng = Rng(5)
    W = init_glorot(rng, 4, 6)
    W += 0.02 * np.sign(W)
    feats = rng.uniform(-1, 1, (3, 6))
    target = rng.uniform(0.1, 1.0, (3, 4))

    def loss_of(Wflat):
        proj = LinearProjection(Wflat.reshape(4, 6), normalize=True)
        out, _ = proj.project_batch(feats)
        return float(np.sum((out - target) ** 2))

    proj = LinearProjection(W, normalize=True)
    out, cache = proj.project_batch(feats)
    dW = proj.backward_batch(2.0 * (out - target), cache)
    err = finite_diff_check(lambda f: loss_of(f), dW, W)
    assert err < 1e-4


def test_gru_zero_parameters_zero_hidden_state():
    enc = GruEncoder(
        word_table=EmbeddingTable(np.zeros((3, 2))),
        weights={n: np.zeros((4, 2) if n.startswith("W") else (4, 4))
                 if not n.startswith("b") else np.zeros(4)
                 for n in GRU_TENSOR_NAMES},
        normalize=False,
    )
    out = enc.encode([0, 1, 2])
    np.testing.assert_array_equal(out, np.zeros(4))
    # with normalization requested the zero vector is a numeric error
    enc.normalize = True
    with pytest.raises(NumericError):
        enc.encode([0, 1, 2])


def test_gru_single_unit_hand_value():
    # z = sigmoid(0) = 0.5, candidate = tanh(1): h1 = 0.5 * tanh(1)
    weights = {
        "Wz": np.zeros((1, 1)), "Uz": np.zeros((1, 1)), "bz": np.zeros(1),
        "Wr": np.zeros((1, 1)), "Ur": np.zeros((1, 1)), "br": np.zeros(1),
        "Wh": np.ones((1, 1)), "Uh": np.zeros((1, 1)), "bh": np.zeros(1),
    }
    enc = GruEncoder(word_table=EmbeddingTable(np.array([[1.0]])),
                     weights=weights, normalize=False)
    out = enc.encode([0])
    assert out[0] == pytest.approx(0.5 * math.tanh(1.0))
    assert out[0] == pytest.approx(0.3808, abs=1e-4)
    enc.normalize = True
    assert enc.encode([0])[0] == pytest.approx(1.0)


def test_gru_empty_sequence_rejected():
    enc = tiny_gru(Rng(6))
    with pytest.raises(ContractError):
        enc.encode([])


def test_gru_is_pure_function_of_tokens():
    enc = tiny_gru(Rng(7))
    a = enc.encode([1, 2, 3, 2])
    b = enc.encode([1, 2, 3, 2])
    np.testing.assert_array_equal(a, b)


def test_gru_output_nonnegative_and_unit_norm():
    enc = tiny_gru(Rng(8), normalize=True)
    rng = Rng(9)
    for _ in range(10):
        tokens = [rng.choice(12) for _ in range(1 + rng.choice(6))]
        out = enc.encode(tokens)
        assert np.all(out >= 0)
        assert abs(np.linalg.norm(out) - 1.0) < 1e-9


@pytest.mark.parametrize("normalize", [False, True])
def test_gru_backward_matches_finite_differences_all_groups(normalize):
    """3-token sequence, hidden 4: every parameter tensor and the word rows."""
    enc = tiny_gru(Rng(10), normalize=normalize)
    tokens = [1, 5, 3]
    target = Rng(11).uniform(0.1, 0.9, 4)

    def loss():
        out, cache = enc.encode_with_cache(tokens)
        return float(np.sum((out - target) ** 2)), out, cache

    base, out, cache = loss()
    grads = {n: np.zeros_like(enc.weights[n]) for n in GRU_TENSOR_NAMES}
    word_grad = np.zeros_like(enc.word_table.weights)
    enc.backward(2.0 * (out - target), cache, grads, word_grad)

    worst = 0.0
    for name in GRU_TENSOR_NAMES:

        def f(flat, name=name):
            saved = enc.weights[name].copy()
            enc.weights[name][...] = flat.reshape(saved.shape)
            val = loss()[0]
            enc.weights[name][...] = saved
            return val

        worst = max(worst, finite_diff_check(f, grads[name], enc.weights[name]))
    used = sorted(set(tokens))

    def f_words(flat):
        saved = enc.word_table.weights.copy()
        enc.word_table.weights[...] = flat.reshape(saved.shape)
        val = loss()[0]
        enc.word_table.weights[...] = saved
        return val

    worst = max(worst, finite_diff_check(f_words, word_grad, enc.word_table.weights))
    assert worst < 1e-4


def test_init_ranges_and_determinism():
    rng = Rng(12)
    table = init_uniform(rng, 40, 50)
    assert np.all(table > -0.1) and np.all(table < 0.1)
    g = init_glorot(Rng(13), 30, 20)
    bound = np.sqrt(6.0 / 50)
    assert np.all(np.abs(g) < bound)
    a = GruEncoder.create(Rng(14), 10, 4, 6, True)
    b = GruEncoder.create(Rng(14), 10, 4, 6, True)
    for n in GRU_TENSOR_NAMES:
        np.testing.assert_array_equal(a.weights[n], b.weights[n])
    np.testing.assert_array_equal(a.word_table.weights, b.word_table.weights)
    assert np.all(a.weights["bz"] == 0) and np.all(a.weights["bh"] == 0)


def test_abs_normalize_unit_norm_and_gradient():
    rng = Rng(15)
    raw = rng.uniform(-1, 1, 6)
    raw += 0.05 * np.sign(raw)
    out, cache = abs_normalize(raw, True)
    assert abs(np.linalg.norm(out) - 1.0) < 1e-12
    d_out = rng.uniform(-1, 1, 6)

    from orderemb.encoders import abs_normalize_backward

    grad = abs_normalize_backward(d_out, cache)
    err = finite_diff_check(
        lambda v: float(abs_normalize(v, True)[0] @ d_out), grad, raw
    )
    assert err < 1e-6


def test_vocabulary_roundtrip_and_unk(tmp_path):
    vocab = Vocabulary(["<unk>", "dog", "cat"])
    assert vocab.id("dog") == 1
    assert vocab.id("mouse") == 0
    assert vocab.encode(["cat", "mouse", "dog"]) == [2, 0, 1]
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    again = Vocabulary.load(path)
    assert again.tokens == vocab.tokens


def test_vocabulary_requires_unk_first(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("dog\ncat\n", encoding="utf-8")
    with pytest.raises(DataFormatError):
        Vocabulary.load(path)
    with pytest.raises(ContractError):
        Vocabulary(["dog", "<unk>"])


def test_vocabulary_from_counts_ordering():
    vocab = Vocabulary.from_counts({"b": 3, "a": 3, "c": 9, "d": 1}, min_count=2)
    assert vocab.tokens == ["<unk>", "c", "a", "b"]
