import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advseg import tensor as T
from advseg.losses import PROB_EPS, adv_loss_d, adv_loss_g, bce_loss, combined_g_loss
from advseg.optim import AdamState, adam_step
from advseg.tensor import Tensor, grad_check

from oracles import adam_scalar, bce_loops

LN2 = math.log(2.0)


# -------------------------------------------------------------------- bce


def test_bce_perfect_prediction():
    y = np.array([[[[0.0, 1.0], [1.0, 0.0]]]])
    assert bce_loss(Tensor(y), y).value < 1e-6


def test_bce_half_is_ln2():
    rng = np.random.default_rng(0)
    y = (rng.uniform(size=(2, 1, 4, 4)) > 0.5).astype(float)
    assert bce_loss(Tensor(np.full(y.shape, 0.5)), y).value == pytest.approx(LN2, abs=1e-12)
    assert bce_loss(Tensor(np.full(y.shape, 0.5)), y).value == pytest.approx(0.693147, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_bce_matches_scalar_loop(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(size=(2, 1, 3, 5))
    p[0, 0, 0, 0] = 0.0  # exercise the clamp
    y = (rng.uniform(size=p.shape) > 0.5).astype(float)
    assert bce_loss(Tensor(p), y).value == pytest.approx(bce_loops(p, y), abs=1e-12)


def test_bce_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        bce_loss(Tensor(np.zeros((1, 1, 2, 2))), np.zeros((1, 1, 2, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_bce_nonnegative(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(size=(1, 1, 3, 3))
    y = (rng.uniform(size=p.shape) > 0.5).astype(float)
    assert bce_loss(Tensor(p), y).value >= 0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_bce_gradient(seed):
    rng = np.random.default_rng(seed)
    p = T.parameter(rng.uniform(0.05, 0.95, size=(1 + seed, 1, 3, 3)))
    y = (rng.uniform(size=p.shape) > 0.5).astype(float)
    assert grad_check(lambda: bce_loss(p, y).tensor, [p]) < 1e-4


# ------------------------------------------------------------ adversarial


def test_adv_d_at_half():
    p = Tensor(np.full((3, 1), 0.5))
    assert adv_loss_d(p, p).value == pytest.approx(2 * LN2, abs=1e-12)
    assert adv_loss_d(p, p).value == pytest.approx(1.386294, abs=1e-6)


def test_adv_d_perfect_discriminator_bounded_by_clamp():
    loss = adv_loss_d(Tensor(np.ones((2, 1))), Tensor(np.zeros((2, 1)))).value
    assert 0 <= loss <= -2 * math.log(1 - PROB_EPS) + 1e-15


@pytest.mark.parametrize("seed", range(5))
def test_adv_d_swap_symmetry(seed):
    rng = np.random.default_rng(seed)
    pr, pf = rng.uniform(0.01, 0.99, size=(2, 4, 1))
    a = adv_loss_d(Tensor(pr), Tensor(pf)).value
    b = adv_loss_d(Tensor(1 - pf), Tensor(1 - pr)).value
    assert a == pytest.approx(b, abs=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_adv_d_is_negated_objective(seed):
    rng = np.random.default_rng(seed)
    pr, pf = rng.uniform(0.01, 0.99, size=(2, 5, 1))
    objective = np.mean(np.log(pr)) + np.mean(np.log(1 - pf))
    assert adv_loss_d(Tensor(pr), Tensor(pf)).value == pytest.approx(-objective, abs=1e-12)


def test_adv_g_values_at_half():
    p = Tensor(np.full((2, 1), 0.5))
    assert adv_loss_g(p, "saturating").value == pytest.approx(-LN2, abs=1e-12)
    assert adv_loss_g(p, "nonsaturating").value == pytest.approx(LN2, abs=1e-12)


def test_adv_g_nonsaturating_near_one():
    loss = adv_loss_g(Tensor(np.ones((2, 1))), "nonsaturating").value
    assert 0 < loss < 1e-6


def test_adv_g_unknown_mode():
    with pytest.raises(ValueError):
        adv_loss_g(Tensor(np.full((1, 1), 0.5)), "wasserstein")


@pytest.mark.parametrize("mode", ["saturating", "nonsaturating"])
def test_adv_g_gradient_sign(mode):
    p = T.parameter(np.linspace(0.01, 0.99, 25).reshape(-1, 1))
    T.backward(adv_loss_g(p, mode).tensor)
    assert np.all(p.grad < 0)


@pytest.mark.parametrize("mode", ["saturating", "nonsaturating"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_adv_gradients(mode, seed):
    rng = np.random.default_rng(seed)
    pr = T.parameter(rng.uniform(0.05, 0.95, size=(3, 1)))
    pf = T.parameter(rng.uniform(0.05, 0.95, size=(3, 1)))
    assert grad_check(lambda: adv_loss_d(pr, pf).tensor, [pr, pf]) < 1e-4
    assert grad_check(lambda: adv_loss_g(pf, mode).tensor, [pf]) < 1e-4


# --------------------------------------------------------------- combined


def test_combined_addition():
    ce = bce_loss(Tensor(np.full((1, 1, 1, 1), 0.5)), np.ones((1, 1, 1, 1)))
    adv = adv_loss_g(Tensor(np.full((1, 1), 0.5)), "nonsaturating")
    assert combined_g_loss(ce, adv).value == pytest.approx(2 * LN2, abs=1e-12)
    assert combined_g_loss(ce, adv).kind == "combined"


def test_combined_weight_zero_is_pure_ce():
    ce = bce_loss(Tensor(np.full((1, 1, 2, 2), 0.3)), np.ones((1, 1, 2, 2)))
    adv = adv_loss_g(Tensor(np.full((1, 1), 0.9)))
    assert combined_g_loss(ce, adv, 0.0).value == ce.value


def test_combined_gradient_is_sum():
    rng = np.random.default_rng(4)
    p = T.parameter(rng.uniform(0.1, 0.9, size=(2, 1, 4, 4)))
    y = (rng.uniform(size=p.shape) > 0.5).astype(float)
    d_w = Tensor(rng.standard_normal((16, 1)) * 0.3)
    d_b = Tensor(np.zeros(1))

    def losses():
        ce = bce_loss(p, y)
        pf = T.sigmoid(T.dense(T.flatten(p), d_w, d_b))
        return ce, adv_loss_g(pf)

    grads = []
    for pick in (lambda ce, adv: ce, lambda ce, adv: adv, lambda ce, adv: combined_g_loss(ce, adv)):
        p.grad = None
        T.backward(pick(*losses()).tensor)
        grads.append(p.grad.copy())
    np.testing.assert_allclose(grads[2], grads[0] + grads[1], rtol=0, atol=1e-12)


# ------------------------------------------------------------------- adam


def test_adam_zero_gradient_keeps_params():
    p = T.parameter(np.array([1.0, -2.0]))
    st_ = AdamState.for_params([p], lr=0.1)
    adam_step(st_, [p], [np.zeros(2)])
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert st_.t == 1


def test_adam_first_step():
    p = T.parameter(np.array([0.0]))
    st_ = AdamState.for_params([p], lr=0.1)
    adam_step(st_, [p], [np.ones(1)])
    assert p.data[0] == pytest.approx(-0.1 / (1 + 1e-8), abs=1e-15)


@pytest.mark.parametrize("betas", [(0.9, 0.99), (0.5, 0.9)])
def test_adam_matches_scalar_reference(betas):
    b1, b2 = betas
    theta = T.parameter(np.array([1.5]))
    st_ = AdamState.for_params([theta], lr=0.05, beta1=b1, beta2=b2)
    expected = adam_scalar(1.5, lambda t: 2 * t, 10, 0.05, b1, b2)
    for k in range(10):
        theta.grad = None
        T.backward(T.sum_(theta * theta))
        adam_step(st_, [theta])
        assert abs(theta.data[0] - expected[k]) < 1e-12


def test_adam_shape_mismatch():
    p = T.parameter(np.zeros(3))
    st_ = AdamState.for_params([T.parameter(np.zeros(2))], lr=0.1)
    with pytest.raises(ValueError):
        adam_step(st_, [p], [np.zeros(3)])


def test_adam_order_independent():
    rng = np.random.default_rng(0)
    a0, b0 = rng.standard_normal(3), rng.standard_normal((2, 2))
    ga, gb = rng.standard_normal(3), rng.standard_normal((2, 2))
    a1, b1 = T.parameter(a0), T.parameter(b0)
    a2, b2 = T.parameter(a0), T.parameter(b0)
    s1 = AdamState.for_params([a1, b1], lr=0.01)
    s2 = AdamState.for_params([b2, a2], lr=0.01)
    for _ in range(3):
        adam_step(s1, [a1, b1], [ga, gb])
        adam_step(s2, [b2, a2], [gb, ga])
    assert a1.data.tobytes() == a2.data.tobytes()
    assert b1.data.tobytes() == b2.data.tobytes()
