import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from antisymrnn.analysis import end_to_end_jacobian, gradcheck_case
from antisymrnn.cells import CellKind, CellParams
from antisymrnn.core import DivergenceError, SeededRng, ShapeError
from antisymrnn.network import (
    ClassifierNet, backward, backward_batch, cross_entropy, finite_diff_check, forward, forward_batch,
    logits_grad, loss_of,
)
from antisymrnn.optim import InitSpec, init_params


def make_net(kind, n=8, m=3, seed=1, eps=0.1):
    gamma = 0.01 if kind in ("antisym_diffusion", "antisym_gated") else 0.0
    return init_params(kind, n, m, 10, InitSpec(1.0, seed), eps, gamma)


def seq(T=12, m=3, seed=1):
    return SeededRng([seed, 9]).normal(T * m).reshape(T, m)


def test_zero_net_gives_zero_logits():
    net = ClassifierNet(CellParams.zeros("antisym", 4, 2), np.zeros((3, 4)), np.zeros(3))
    logits, _ = forward(net, seq(5, 2))
    assert_array_equal(logits, 0)


def test_empty_sequence_gives_bias():
    net = make_net("lstm")
    net.readout_b[:] = np.arange(10)
    logits, _ = forward(net, np.zeros((0, 3)))
    assert_array_equal(logits, np.arange(10))


def test_frozen_dynamics():
    net = make_net("antisym", eps=0.0)
    a, _ = forward(net, seq(seed=1))
    b, _ = forward(net, seq(seed=2))
    assert_array_equal(a, b)
    assert_array_equal(a, net.readout_b)
    grads = backward(net, forward(net, seq())[1], 3)
    for k in net.cell.weights:
        assert_array_equal(grads[k], 0)
    assert np.abs(grads["readout_b"]).max() > 0


@pytest.mark.parametrize("logits,label,expected", [
    (np.zeros(10), 4, np.log(10)), ([1.0, 0.0], 0, np.log1p(np.exp(-1))),
])
def test_cross_entropy(logits, label, expected):
    assert_allclose(cross_entropy(logits, label), expected, rtol=1e-15)


def test_cross_entropy_saturated_and_range():
    assert cross_entropy([100.0, 0.0], 0) < 1e-40
    assert cross_entropy([1000.0, -1000.0], 1) == pytest.approx(2000.0)
    with pytest.raises(ValueError):
        cross_entropy([0.0, 0.0], 2)


def test_logits_grad_uniform():
    g = logits_grad(np.zeros(10), [3])[0]
    expected = np.full(10, 0.1)
    expected[3] = -0.9
    assert_allclose(g, expected)


def test_forward_is_pure():
    net = make_net("antisym_gated")
    a, ta = forward(net, seq())
    b, tb = forward(net, seq())
    assert_array_equal(a, b)
    for ca, cb in zip(ta.caches, tb.caches):
        assert_array_equal(ca.h, cb.h)
        assert_array_equal(ca.a, cb.a)


def test_zero_params_gradcheck_is_zero():
    net = ClassifierNet(CellParams.zeros("antisym_gated", 3, 2, epsilon=0.1), np.zeros((2, 3)), np.zeros(2))
    grads = backward(net, forward(net, np.zeros((4, 2)))[1], 0)
    for k in net.cell.weights:
        assert_array_equal(grads[k], 0)
    assert finite_diff_check(net, np.zeros((4, 2)), 0) < 1e-12


@pytest.mark.parametrize("kind", [k.value for k in CellKind])
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_bptt_matches_finite_differences(kind, seed):
    assert gradcheck_case(kind, 8, 3, 12, seed) < 1e-6


def test_gradcheck_catches_a_wrong_gradient(monkeypatch):
    import antisymrnn.network as network

    real = network.backward

    def broken(net, tape, label, return_state_grad=False):
        g = real(net, tape, label)
        g["v_h"] = g["v_h"] * 1.01
        return g

    monkeypatch.setattr(network, "backward", broken)
    assert finite_diff_check(make_net("antisym"), seq(), 1) > 1e-3


@pytest.mark.parametrize("kind", [k.value for k in CellKind])
def test_state_gradient_equals_jacobian_product(kind):
    net = make_net(kind, n=6, seed=4)
    x = seq(T=10, seed=4)
    rng = SeededRng(11)
    h0 = 0.3 * rng.normal(6)
    c0 = 0.3 * rng.normal(6) if kind == "lstm" else None
    _, tape = forward(net, x, h0, c0)
    _, dh, dc = backward(net, tape, 2, return_state_grad=True)
    jac = end_to_end_jacobian(net.cell, x, h0, c0)
    dlogits = logits_grad(tape.logits, [2])[0]
    top = dlogits @ net.readout_w
    if kind == "lstm":
        top = np.concatenate([top, np.zeros(6)])
        got = np.concatenate([dh, dc])
    else:
        got = dh
    assert_allclose(got, top @ jac, rtol=1e-9, atol=1e-12)


def test_batch_gradient_is_mean_of_singles():
    net = make_net("antisym_diffusion")
    xs = np.stack([seq(seed=s) for s in range(4)])
    labels = [0, 3, 3, 7]
    gb = backward_batch(net, forward_batch(net, xs)[1], labels)
    singles = [backward(net, forward(net, xs[i])[1], labels[i]) for i in range(4)]
    for k in gb:
        assert_allclose(gb[k], np.mean([g[k] for g in singles], axis=0), rtol=1e-12, atol=1e-15)


def test_loss_and_shapes():
    net = make_net("vanilla")
    assert loss_of(net, seq(), 1) > 0
    with pytest.raises(ShapeError):
        forward(net, np.zeros((4, 5)))
    with pytest.raises(ValueError):
        backward(net, forward(net, seq())[1], 10)


def test_nonfinite_state_raises():
    net = make_net("antisym", eps=1.0)
    with pytest.raises(DivergenceError):
        forward(net, np.full((3, 3), np.nan))
