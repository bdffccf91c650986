import numpy as np
import pytest

from orderemb.errors import ContractError, NumericError
from orderemb.numerics import AdamState, Rng, adam_step, finite_diff_check


def make_state(param, lr=0.01):
    return AdamState.for_param(param, lr=lr, name="p")


def test_adam_zero_gradient_fresh_state_leaves_param_unchanged():
    p = np.array([1.0, -2.0, 3.0])
    state = make_state(p)
    adam_step(p, np.zeros(3), state)
    assert state.t == 1
    np.testing.assert_array_equal(p, [1.0, -2.0, 3.0])


def test_adam_first_step_magnitude_is_learning_rate():
    # hand evaluation at t=1: m_hat = g, v_hat = g^2, update = -lr*g/(|g|+eps)
    p = np.array([0.0])
    state = make_state(p, lr=0.01)
    adam_step(p, np.array([1.0]), state)
    expected = -0.01 * 1.0 / (1.0 + 1e-8)
    assert p[0] == pytest.approx(expected, rel=1e-12)
    assert p[0] == pytest.approx(-0.01, rel=1e-6)


def test_adam_two_steps_constant_gradient_strictly_decreasing():
    p = np.array([0.0])
    state = make_state(p)
    vals = [p[0]]
    for _ in range(2):
        adam_step(p, np.array([1.0]), state)
        vals.append(p[0])
    assert vals[1] < vals[0] and vals[2] < vals[1]
    assert state.t == 2


def test_adam_matches_reference_formulas_on_random_tensors():
    rng = np.random.default_rng(7)
    p = rng.normal(size=(3, 4))
    ref = p.copy()
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    state = make_state(p, lr=0.003)
    for t in range(1, 6):
        g = rng.normal(size=(3, 4))
        adam_step(p, g, state)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mh = m / (1 - 0.9 ** t)
        vh = v / (1 - 0.999 ** t)
        ref -= 0.003 * mh / (np.sqrt(vh) + 1e-8)
    np.testing.assert_allclose(p, ref, rtol=1e-12)


def test_adam_shape_mismatch_rejected():
    p = np.zeros(3)
    state = make_state(p)
    with pytest.raises(ContractError):
        adam_step(p, np.zeros(4), state)


def test_adam_nonfinite_gradient_names_tensor():
    p = np.zeros(2)
    state = AdamState.for_param(p, lr=0.01, name="concept_table")
    with pytest.raises(NumericError, match="concept_table"):
        adam_step(p, np.array([np.nan, 0.0]), state)


def test_adam_preserves_shape_and_finiteness():
    rng = np.random.default_rng(0)
    for shape in [(1,), (5,), (2, 3), (4, 4)]:
        p = rng.normal(size=shape)
        state = make_state(p)
        for _ in range(3):
            adam_step(p, rng.normal(size=shape), state)
        assert p.shape == shape
        assert np.all(np.isfinite(p))
        assert np.all(state.v >= 0)


def test_finite_diff_squared_norm():
    x = np.array([1.0, 2.0])
    err = finite_diff_check(lambda v: float(v @ v), 2 * x, x, h=1e-5)
    assert err < 1e-6


def test_finite_diff_constant_function():
    x = np.array([0.3, -0.4, 1.0])
    err = finite_diff_check(lambda v: 5.0, np.zeros(3), x, h=1e-5)
    assert err < 1e-12


def test_finite_diff_skip_mask_ignores_kinks():
    # f has an abs kink at x0 = 0; the mask must exclude it
    x = np.array([0.0, 1.0])
    f = lambda v: abs(v[0]) + v[1] ** 2
    grad = np.array([123.0, 2.0])  # nonsense at the kink, correct elsewhere
    err = finite_diff_check(f, grad, x, skip=np.array([True, False]))
    assert err < 1e-9


def test_finite_diff_rejects_bad_h_and_shapes():
    x = np.ones(2)
    with pytest.raises(ContractError):
        finite_diff_check(lambda v: 0.0, np.zeros(2), x, h=0.0)
    with pytest.raises(ContractError):
        finite_diff_check(lambda v: 0.0, np.zeros(3), x)


def test_rng_same_seed_same_sequences():
    a = Rng(42)
    b = Rng(42)
    assert np.array_equal(a.uniform(0, 1, 10), b.uniform(0, 1, 10))
    assert [a.choice(7) for _ in range(20)] == [b.choice(7) for _ in range(20)]
    assert np.array_equal(a.permutation(13), b.permutation(13))


def test_rng_choice_single_option_is_zero():
    rng = Rng(0)
    assert all(rng.choice(1) == 0 for _ in range(10))


def test_rng_uniform_mean_large_sample():
    rng = Rng(123)
    draws = rng.uniform(0.0, 1.0, 100_000)
    assert abs(float(draws.mean()) - 0.5) < 0.01
    assert draws.min() >= 0.0 and draws.max() < 1.0


def test_rng_empty_range_rejected():
    rng = Rng(1)
    with pytest.raises(ContractError):
        rng.uniform(1.0, 1.0)
    with pytest.raises(ContractError):
        rng.choice(0)


def test_rng_spawn_streams_differ_but_are_deterministic():
    a = Rng(5).spawn(1)
    b = Rng(5).spawn(2)
    c = Rng(5).spawn(1)
    assert not np.array_equal(a.uniform(0, 1, 8), b.uniform(0, 1, 8))
    assert np.array_equal(Rng(5).spawn(1).uniform(0, 1, 8), c.uniform(0, 1, 8))
