import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from antisymrnn.core import SeededRng
from antisymrnn.ode import (
    SYSTEMS, DynamicsSpec, Grid, amplification_factor, euler_stable, euler_test_equation, forward_euler,
    named_system, ode_stability_class, phase_portrait,
)
from antisymrnn.spectral import eigenvalues


def test_stationary_field():
    tr = forward_euler(lambda h: np.zeros_like(h), [1.0, 2.0], 0.3, 10)
    assert_array_equal(tr.points, np.tile([1.0, 2.0], (11, 1)))


def test_one_step_decay():
    assert_allclose(forward_euler(lambda y: -y, 1.0, 0.1, 1).points[-1], [0.9])


def test_rotation_growth_law():
    beta, eps = 1.7, 0.05
    a = np.array([[0, beta], [-beta, 0]])
    norms = forward_euler(lambda h: a @ h, [1.0, 0.0], eps, 1000).norms
    assert_allclose(norms[1:] / norms[:-1], np.sqrt(1 + eps**2 * beta**2), rtol=1e-12)
    assert_allclose(forward_euler(lambda h: a @ h / beta, [1.0, 0.0], 0.1, 1).norms[1], np.sqrt(1.01))


def test_divergence_flag():
    tr = forward_euler(lambda h: 100 * h, [1.0], 1.0, 50)
    assert tr.diverged and len(tr.points) < 51
    assert forward_euler(lambda h: h * np.nan, [1.0], 0.1, 3).diverged


def test_test_equation():
    y = euler_test_equation(-1.0, 1.0, 0.1, 3)
    assert_allclose(y, [1, 0.9, 0.81, 0.729])


@pytest.mark.parametrize("lam,eps,expected", [(0, 0.5, 1.0), (1j, 0.1, np.sqrt(1.01)), (-1, 0.1, 0.9)])
def test_amplification(lam, eps, expected):
    assert_allclose(amplification_factor(lam, eps), expected)


def test_euler_stable_examples():
    assert euler_stable([-1], 0.1)
    assert not euler_stable([1j, -1j], 0.1)
    assert euler_stable([-0.01 + 1j, -0.01 - 1j], 0.01)
    for eps in (0.01, 0.1, 1.0):
        assert not euler_stable([1j, -1j], eps)


def test_stability_classes():
    assert ode_stability_class([-1 + 2j, -1 - 2j]) == "stable"
    assert ode_stability_class([0.5]) == "unstable"
    assert ode_stability_class([1j, -1j]) == "critical"
    with pytest.raises(ValueError):
        ode_stability_class([])


def test_antisymmetric_part_is_critical():
    for seed in range(10):
        a = SeededRng(seed).normal(4).reshape(2, 2)
        assert ode_stability_class(eigenvalues(a - a.T)) == "critical"
        assert ode_stability_class(eigenvalues(a - a.T - 0.1 * np.eye(2))) == "stable"


def test_decoupling_by_diagonalization():
    p = np.array([[1.0, 2.0], [0.5, -1.0]])
    lam = np.array([-0.5, 0.3])
    a = p @ np.diag(lam) @ np.linalg.inv(p)
    h0 = np.array([0.7, -0.2])
    h = forward_euler(lambda h: a @ h, h0, 0.1, 40).points
    w0 = np.linalg.solve(p, h0)
    w = np.stack([euler_test_equation(l, w, 0.1, 40).real for l, w in zip(lam, w0)], axis=1)
    assert_allclose(h, w @ p.T, atol=1e-10)


def test_grid_and_counts():
    g = Grid.parse("-2:2:5")
    assert g.initial_conditions().shape == (25, 2)
    assert_array_equal(g.initial_conditions()[1], [-2, -1])
    trajs = phase_portrait(named_system("negative"), g, 0.1, 100)
    assert len(trajs) == 25 and all(len(t.points) == 101 for t in trajs)


def test_portrait_matches_direct_euler():
    spec = named_system("vanilla", seed=3)
    trajs = phase_portrait(spec, Grid(-1, 1, 3), 0.2, 30)
    w = spec.transition()
    direct = forward_euler(lambda h: np.tanh(w @ h), trajs[4].points[0], 0.2, 30).points
    assert_allclose(trajs[4].points, direct, rtol=1e-14, atol=1e-15)


def test_portrait_deterministic_with_input():
    spec = named_system("antisym", gamma=0.1, seed=2, gaussian_input=True)
    a = phase_portrait(spec, Grid(-1, 1, 3), 0.1, 20)
    b = phase_portrait(spec, Grid(-1, 1, 3), 0.1, 20)
    for x, y in zip(a, b):
        assert_array_equal(x.points, y.points)


def test_positive_system_expands():
    trajs = phase_portrait(named_system("positive"), Grid(0.5, 1, 2), 0.5, 200)
    assert all(t.norms[-1] > t.norms[0] for t in trajs)


def test_named_systems():
    for name in SYSTEMS:
        named_system(name)
    with pytest.raises(ValueError):
        named_system("bogus")
    with pytest.raises(ValueError):
        DynamicsSpec("bogus", np.eye(2))
