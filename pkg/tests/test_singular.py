import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.errors import GeometricDependenceError, PreconditionError
from src.problem import classical_quadratic
from src.singular import (
    FaceSelection,
    TraceTolerances,
    energy,
    exposed_face,
    independence_margin,
    minimal_energy_element,
    minimax_candidates,
    nondegeneracy_check,
    numeric_sheets,
    retrace_gap,
    trace_backward,
    trace_forward,
    trace_two_branch,
    two_branch_fixture,
)

# gradients (q, p) = (-a^2/2, a) of u = min(1.5 x, -0.5 x) - |a|^2 t/2 at the interface
A = [-1.125, 1.5]
B = [-0.125, -0.5]
FAR = [5.0, 0.5]


@pytest.fixture
def classical():
    return two_branch_fixture(1.5, -0.5)


@pytest.fixture
def contact():
    return two_branch_fixture(1.5, -0.5, discount=0.5)


# -------------------------------
# Faces
# -------------------------------
def test_independence_margin():
    assert independence_margin([[0.0, 1.0]]) == float("inf")
    assert independence_margin([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]) == pytest.approx(0.0, abs=1e-14)
    assert independence_margin([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]) == 0.0
    assert independence_margin([A, B]) > 1.0


def test_exposed_face_and_slack():
    face = exposed_face([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    assert face.active == (0,)
    assert face.inactive == (1, 2)
    assert face.slack == pytest.approx(1.0)
    whole = exposed_face([A, B], [1.0, 0.5])
    assert whole.active == (0, 1)
    assert whole.slack == float("inf")


def test_face_preconditions():
    with pytest.raises(PreconditionError):
        FaceSelection([A, B], ())
    with pytest.raises(PreconditionError):
        exposed_face([A, B], [0.0, 0.0])
    with pytest.raises(GeometricDependenceError):
        FaceSelection.whole([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).require_independent()


# -------------------------------
# Minimal-energy element
# -------------------------------
def test_two_vertex_energy_minimum():
    spec = classical_quadratic(1)
    em = minimal_energy_element(spec, 0.5, [0.25], FaceSelection.whole([A, B]), 0.0)
    assert_allclose(em.mu, [0.5, 0.5], atol=1e-9)
    assert_allclose(em.p_bar, [0.5], atol=1e-9)
    assert_allclose(em.v_bar, [0.5], atol=1e-9)
    assert em.q_bar == pytest.approx(-0.625, abs=1e-9)
    assert em.energy == pytest.approx(-0.5, abs=1e-12)
    assert em.interior
    assert em.curvature == pytest.approx(4.0)
    assert energy(spec, 0.5, [0.25], [A, B], [0.5, 0.5], 0.0) == pytest.approx(-0.5)


def test_energy_minimum_on_smaller_support():
    spec = classical_quadratic(1)
    em = minimal_energy_element(spec, 0.5, [0.25], FaceSelection.whole([A, B, FAR]), 0.0)
    assert_allclose(em.mu, [0.5, 0.5, 0.0], atol=1e-9)
    assert em.method != "newton"
    assert not em.interior
    assert em.kkt_residual <= 1e-8


def test_energy_refuses_dependent_face():
    with pytest.raises(GeometricDependenceError):
        minimal_energy_element(classical_quadratic(1), 0.5, [0.0],
                               FaceSelection.whole([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), 0.0)


# -------------------------------
# Non-degeneracy
# -------------------------------
def test_two_branch_point_is_nondegenerate_and_minimax():
    spec = classical_quadratic(1)
    face = FaceSelection.whole([A, B])
    report = nondegeneracy_check(face, minimal_energy_element(spec, 0.5, [0.25], face, 0.0))
    assert report.passed
    assert report.minimax
    assert report.failed_hypothesis() == ""
    assert report.to_dict()["exposure_slack"] is None


def test_face_exposed_forward_but_not_minimax():
    spec = classical_quadratic(1)
    vertices = np.array([A, B, FAR])
    face = FaceSelection(vertices, (0, 1))
    report = nondegeneracy_check(face, minimal_energy_element(spec, 0.5, [0.25], face, 0.0))
    assert report.passed
    assert report.exposure_slack == pytest.approx(5.625, abs=1e-8)
    assert not report.minimax


def test_interior_failure_is_named():
    spec = classical_quadratic(1)
    face = FaceSelection.whole([A, B, FAR])
    report = nondegeneracy_check(face, minimal_energy_element(spec, 0.5, [0.25], face, 0.0))
    assert not report.passed
    assert "relative interior" in report.failed_hypothesis()


def test_check_without_energy_reports_independence_only():
    report = nondegeneracy_check(FaceSelection.whole([A, B]))
    assert report.geometrically_independent
    assert not report.passed


def test_minimax_candidates_on_interface(classical):
    x = classical.interface(0.5)
    branches = [s.evaluate(0.5, x) for s in classical.sheets]
    candidates = minimax_candidates(classical.spec, 0.5, x, branches)
    assert len(candidates) == 1
    assert candidates[0].face.active == (0, 1)
    with pytest.raises(PreconditionError):
        minimax_candidates(classical.spec, 0.5, x, [None] * 9)


# -------------------------------
# Tracing
# -------------------------------
def test_forward_trace_follows_classical_interface(classical):
    curve = trace_forward(classical.spec, 0.5, classical.interface(0.5), classical.sheets, 1.0)
    assert curve.stop_reason == "horizon"
    assert curve.stop_time == pytest.approx(1.5)
    assert_allclose(curve.velocities[:, 0], 0.5, atol=1e-8)
    assert_allclose(curve.points[:, 0], 0.5 * curve.times, atol=1e-8)
    assert curve.max_equality_residual <= 1e-7
    assert curve.hypotheses["minimax"]
    frame = curve.to_frame()
    assert {"t", "x1", "lam1", "v_bar1", "value1", "value2", "det_Xz1"} <= set(frame.columns)


def test_forward_trace_follows_contact_interface(contact):
    curve = trace_forward(contact.spec, 0.5, contact.interface(0.5), contact.sheets, 0.5)
    distance = max(abs(s.x[0] - contact.interface(s.t)[0]) for s in curve.samples)
    assert distance <= 1e-6
    speeds = np.array([contact.interface_speed(t)[0] for t in curve.times])
    assert_allclose(curve.velocities[:, 0], speeds, atol=1e-7)
    assert curve.max_equality_residual <= 1e-7


@pytest.mark.parametrize("a1, a2, discount, closed_form", [
    (1.0, -1.0, 0.0, lambda t: 0.0),
    (2.0, 0.0, 0.0, lambda t: t),
    (2.0, 0.0, 1.0, lambda t: 1.0 - np.exp(-t)),
])
def test_forward_trace_matches_closed_form_interface(a1, a2, discount, closed_form):
    fixture = two_branch_fixture(a1, a2, discount=discount)
    x0 = [closed_form(1.0)]
    curve = trace_forward(fixture.spec, 1.0, x0, fixture.sheets, 1.0)
    assert curve.stop_reason == "horizon"
    assert curve.stop_time == pytest.approx(2.0)
    deviation = max(abs(s.x[0] - closed_form(s.t)) for s in curve.samples)
    assert deviation <= 1e-8


def test_retrace_returns_to_start(classical):
    curve = trace_forward(classical.spec, 0.5, classical.interface(0.5), classical.sheets, 1.0)
    assert retrace_gap(classical.spec, curve, classical.sheets) <= 1e-6


def test_backward_trace_is_in_increasing_time(classical):
    curve = trace_backward(classical.spec, 0.5, classical.interface(0.5), classical.sheets, 0.25)
    assert curve.direction == "backward"
    assert np.all(np.diff(curve.times) > 0)
    assert curve.times[0] == pytest.approx(0.25)
    assert_allclose(curve.points[:, 0], 0.5 * curve.times, atol=1e-8)
    assert curve.diagnostics["left_derivative_gap"] <= 1e-8


def test_backward_trace_checks_supplied_element(classical):
    x = classical.interface(0.5)
    trace_backward(classical.spec, 0.5, x, classical.sheets, 0.2, qp0=[-0.625, 0.5])
    with pytest.raises(PreconditionError):
        trace_backward(classical.spec, 0.5, x, classical.sheets, 0.2, qp0=A)


def test_two_branch_trace(contact):
    curve = trace_two_branch(contact.spec, 0.5, contact.interface(0.5), contact.sheets, 0.5, 0.25,
                             interface=contact.interface)
    assert curve.direction == "both"
    assert np.all(np.diff(curve.times) > 0)
    assert curve.times[0] == pytest.approx(0.25)
    assert curve.times[-1] == pytest.approx(1.0)
    assert curve.diagnostics["interface_distance"] <= 1e-6
    assert curve.diagnostics["interface_residual"] <= 1e-7
    assert curve.diagnostics["forward_stop"] == "horizon"
    assert curve.diagnostics["backward_stop"] == "horizon"
    assert curve.diagnostics["backward_stop_time"] == pytest.approx(0.25)
    assert curve.header()["samples"] == len(curve.samples)


def test_trace_with_numerical_sheets(classical):
    x = classical.interface(0.5)
    classification, sheets = numeric_sheets(classical.spec, 0.5, x)
    assert len(sheets) == 2
    curve = trace_forward(classical.spec, 0.5, x, sheets, 0.1, TraceTolerances(revalidate_every=0),
                          classification)
    assert curve.stop_reason == "horizon"
    assert_allclose(curve.velocities[:, 0], 0.5, atol=1e-6)


def test_trace_preconditions(classical):
    x = classical.interface(0.5)
    with pytest.raises(PreconditionError):
        trace_forward(classical.spec, 0.5, x, classical.sheets[:1], 1.0)
    with pytest.raises(PreconditionError):
        trace_forward(classical.spec, 0.5, x + 0.3, classical.sheets, 1.0)
    with pytest.raises(PreconditionError):
        trace_forward(classical.spec, 0.5, x, classical.sheets, 0.0)
    with pytest.raises(PreconditionError):
        trace_backward(classical.spec, 0.5, x, classical.sheets, 0.5)
