import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.characteristics import (
    SampledCurve,
    StepPolicy,
    bump_check,
    caratheodory_solve,
    herglotz_report,
    herglotz_residual,
    initial_state,
    integrate_lie,
    integrate_variational,
    propagate,
    split_lie,
)
from src.errors import PreconditionError
from src.problem import DoubleWellDatum, LinearDatum, classical_quadratic, contact_discounted, focusing

FAMILIES = [
    classical_quadratic(1, LinearDatum([0.7])),
    contact_discounted(1, 1.0, DoubleWellDatum(1)),
    focusing(1, 1.0),
]


def test_classical_linear_characteristic_closed_form():
    spec = classical_quadratic(2, LinearDatum([1.0, -2.0]))
    z = np.array([0.3, 0.1])
    traj = integrate_lie(spec, z, 2.0)
    a = np.array([1.0, -2.0])
    assert_allclose(traj.X[-1], z + 2.0 * a, atol=1e-12)
    assert_allclose(traj.P[-1], a, atol=1e-12)
    assert traj.U[-1] == pytest.approx(a @ z + 0.5 * (a @ a) * 2.0, abs=1e-10)


def test_contact_characteristic_closed_form():
    lam, a, z, t = 1.0, 1.0, 0.2, 1.5
    spec = contact_discounted(1, lam, LinearDatum([a]))
    X, P, U = integrate_lie(spec, [z], t).terminal
    decay = np.exp(-lam * t)
    assert P[0] == pytest.approx(a * decay, abs=1e-9)
    assert X[0] == pytest.approx(z + a * (1.0 - decay) / lam, abs=1e-9)
    # U' = P^2/2 - lam U with U(0) = a z
    expected = decay * a * z + 0.5 * a * a * (np.exp(-lam * t) - np.exp(-2 * lam * t)) / lam
    assert U == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("spec", FAMILIES)
@pytest.mark.parametrize("z", [-1.2, -0.3, 0.4, 1.1])
def test_variational_identity_holds(spec, z):
    var = integrate_variational(spec, [z], 0.9)
    assert var.identity_residual() <= 1e-7


@pytest.mark.parametrize("spec", FAMILIES)
def test_herglotz_residual_along_characteristics(spec):
    for z in (-0.8, 0.5):
        traj = integrate_lie(spec, [z], 0.9)
        assert herglotz_residual(spec, traj) <= 1e-6


def test_herglotz_report_components():
    spec = contact_discounted(1, 0.5, DoubleWellDatum(1))
    report = herglotz_report(spec, integrate_lie(spec, [0.4], 1.0))
    assert report.residual == max(report.euler_lagrange, report.momentum_gap)
    assert report.momentum_gap <= 1e-6


def test_focusing_jacobian_vanishes_at_focal_time():
    spec = focusing(1, 1.0)
    var = integrate_variational(spec, [0.5], 1.0)
    assert var.det_Xz()[-1] == pytest.approx(0.0, abs=1e-10)
    assert_allclose(var.char.X[-1], [0.0], atol=1e-12)


def test_bump_check_agrees_with_variational_system():
    spec = contact_discounted(1, 1.0, DoubleWellDatum(1))
    report = bump_check(spec, [0.3], 1.0)
    assert report["max_gap"] <= 1e-6


def test_finite_difference_mode_attaches_bump_report():
    spec = contact_discounted(1, 1.0, DoubleWellDatum(1), derivative_mode="finite_difference")
    var = integrate_variational(spec, [0.3], 0.5)
    assert var.bump_report is not None
    assert var.bump_report["max_gap"] <= 1e-4


def test_propagate_is_time_symmetric():
    spec = contact_discounted(1, 1.0, DoubleWellDatum(1))
    control = StepPolicy(step=1e-3)
    y0 = initial_state(spec, [0.6])
    _, Y = propagate(spec, 0.0, y0, 1.0, control)
    _, back = propagate(spec, 1.0, Y[-1], 0.0, control)
    assert_allclose(back[-1], y0, atol=1e-10)


@pytest.mark.parametrize("method", ["RK45", "DOP853"])
def test_adaptive_methods_match_rk4(method):
    spec = contact_discounted(1, 1.0, DoubleWellDatum(1))
    reference = integrate_lie(spec, [0.2], 1.0, StepPolicy(step=1e-3))
    adaptive = integrate_lie(spec, [0.2], 1.0, StepPolicy(method=method, step=0.05))
    assert adaptive.method == method
    assert_allclose(adaptive.X[-1], reference.X[-1], atol=1e-8)
    assert adaptive.U[-1] == pytest.approx(reference.U[-1], abs=1e-8)


def test_caratheodory_reproduces_characteristic_value():
    spec = contact_discounted(1, 1.0, DoubleWellDatum(1))
    traj = integrate_lie(spec, [0.5], 1.0)
    result = caratheodory_solve(spec, traj.as_curve(spec), traj.U[0], substeps=2)
    assert result.terminal == pytest.approx(traj.U[-1], abs=1e-7)
    assert result.residual <= 1e-7


def test_caratheodory_on_broken_curve():
    spec = classical_quadratic(1, LinearDatum([0.0]))
    curve = SampledCurve([0.0, 0.5, 1.0], [[0.0], [1.0], [0.0]])
    result = caratheodory_solve(spec, curve, 0.0)
    # |xi'| = 2 on both legs, L = 2
    assert result.terminal == pytest.approx(2.0, abs=1e-12)


def test_curve_rejects_non_increasing_grid():
    with pytest.raises(ValueError):
        SampledCurve([0.0, 0.0, 1.0], [[0.0], [1.0], [2.0]])


def test_integration_rejects_non_positive_horizon():
    with pytest.raises(PreconditionError):
        integrate_lie(focusing(1), [0.1], 0.0)


def test_trajectory_frames_and_bounds():
    spec = classical_quadratic(1, LinearDatum([1.0]))
    var = integrate_variational(spec, [0.0], 1.0, StepPolicy(step=0.25))
    frame = var.to_frame()
    assert list(frame.columns[:4]) == ["s", "X1", "P1", "U"]
    assert {"Xz11", "Pz11", "Uz1"} <= set(frame.columns)
    assert len(frame) == 5
    assert var.char.bounds(spec)["bound"] == pytest.approx(1.0)
    X, P, U = split_lie(np.array([1.0, 2.0, 3.0]), 1)
    assert (X[0], P[0], U) == (1.0, 2.0, 3.0)
