import numpy as np
import pytest

from src.errors import CflViolation, PreconditionError
from src.grid_oracle import (
    compare,
    convergence_ratio,
    detect_singular_grid,
    lf_solve,
    singular_locations,
)
from src.problem import LinearDatum, MinDatum, classical_quadratic, custom_polynomial, focusing
from src.singular import two_branch_fixture


@pytest.fixture(scope="module")
def fixture():
    return two_branch_fixture(1.5, -0.5)


@pytest.fixture(scope="module")
def two_branch_solution(fixture):
    return lf_solve(fixture.spec, ([-2.0], [2.0]), 0.01, T=1.0, save_every=10)


def test_two_branch_values_within_sqrt_dx(fixture, two_branch_solution):
    points = [(t, [x]) for t in (0.25, 0.5, 1.0) for x in np.linspace(-1.0, 1.0, 21)]
    values = [fixture.value(t, x) for t, x in points]
    stats = compare(two_branch_solution, points, values)
    assert stats["count"] == len(points)
    assert stats["max"] <= np.sqrt(0.01)
    assert two_branch_solution.horizon == pytest.approx(1.0)
    assert not two_branch_solution.advisory


def test_kinks_follow_the_interface(fixture, two_branch_solution):
    dx = float(two_branch_solution.dx[0])
    locations = singular_locations(two_branch_solution)
    assert list(locations.columns) == ["t", "x1", "jump", "flagged"]
    late = locations[locations["t"] >= 0.1]
    assert len(late) > 0
    for t, x in zip(late["t"], late["x1"]):
        assert abs(x - fixture.interface(t)[0]) <= 2.0 * dx


def test_asymmetric_kinks_track_x_equals_t():
    sol = lf_solve(two_branch_fixture(2.0, 0.0).spec, ([-2.0], [2.0]), 0.01, T=1.0, save_every=10)
    locations = singular_locations(sol)
    late = locations[locations["t"] >= 0.1]
    assert len(late) > 0
    assert (late["x1"] - late["t"]).abs().max() <= 2.0 * 0.01


def test_smooth_focusing_has_no_kinks():
    sol = lf_solve(focusing(1, 1.0), ([-1.0], [1.0]), 0.01, T=0.5, save_every=10)
    flags = detect_singular_grid(sol, 10.0 * 0.01)
    assert all(len(cells.points) == 0 for cells in flags)


def test_no_kinks_for_linear_datum():
    sol = lf_solve(classical_quadratic(1, LinearDatum([1.0])), ([-1.0], [1.0]), 0.02, T=0.5)
    flags = detect_singular_grid(sol, 0.2)
    assert all(len(cells.points) == 0 for cells in flags)
    assert singular_locations(sol, flags)["flagged"].sum() == 0


def test_fixed_step_breaking_cfl_raises_with_partial_solution(fixture):
    with pytest.raises(CflViolation) as err:
        lf_solve(fixture.spec, ([-1.0], [1.0]), 0.01, dt=0.1, T=1.0)
    partial = err.value.solution
    assert partial is not None
    assert partial.times.size == 1
    assert partial.values.shape == (1, 201)


def test_dimension_preconditions():
    with pytest.raises(PreconditionError):
        lf_solve(classical_quadratic(3), ([-1.0] * 3, [1.0] * 3), 0.1, T=0.1)
    with pytest.raises(PreconditionError):
        lf_solve(classical_quadratic(1), ([-1.0, -1.0], [1.0, 1.0]), 0.1, T=0.1)
    with pytest.raises(PreconditionError):
        lf_solve(classical_quadratic(1), ([1.0], [-1.0]), 0.1, T=0.1)


def test_focusing_before_focal_time():
    spec = focusing(1, 1.0)
    sol = lf_solve(spec, ([-1.5], [1.5]), 0.01, T=0.5)
    points = [(t, [x]) for t in (0.25, 0.5) for x in np.linspace(-0.5, 0.5, 11)]
    values = [-x[0] ** 2 / (2.0 * (1.0 - t)) for t, x in points]
    assert compare(sol, points, values)["max"] <= 0.02


def test_scheme_is_monotone():
    lower = classical_quadratic(1, MinDatum([LinearDatum([1.0]), LinearDatum([-1.0])]))
    upper = classical_quadratic(1, LinearDatum([1.0]))
    box = ([-1.0], [1.0])
    a = lf_solve(lower, box, 0.02, dt=0.01, T=0.5)
    b = lf_solve(upper, box, 0.02, dt=0.01, T=0.5)
    assert np.all(a.values <= b.values + 1e-12)


def test_negative_u_coupling_is_advisory():
    spec = custom_polynomial(1, [{"coef": 0.5, "p": [2]}, {"coef": -0.2, "u": 1}], LinearDatum([0.5]))
    sol = lf_solve(spec, ([-1.0], [1.0]), 0.05, T=0.2)
    assert sol.advisory
    assert sol.metadata()["advisory"]


def test_points_outside_the_grid_are_excluded(two_branch_solution):
    stats = compare(two_branch_solution, [(0.5, [3.0]), (2.0, [0.0])], [0.0, 0.0])
    assert stats["count"] == 0
    assert stats["excluded"] == [0, 1]


def test_two_dimensional_solve_and_frame():
    fixture = two_branch_fixture([1.0, 0.0], [0.0, 1.0], n=2)
    sol = lf_solve(fixture.spec, ([-1.0, -1.0], [1.0, 1.0]), 0.1, T=0.2)
    frame = sol.to_frame()
    assert list(frame.columns) == ["t", "x1", "x2", "u"]
    assert len(frame) == sol.times.size * 21 * 21
    assert sol.interpolate(0.2, [0.3, -0.4]) == pytest.approx(fixture.value(0.2, [0.3, -0.4]), abs=0.1)


def test_convergence_ratio_improves_with_refinement(fixture):
    points = [(0.5, [x]) for x in np.linspace(-1.0, 1.0, 9)]
    values = [fixture.value(t, x) for t, x in points]
    ratio = convergence_ratio(fixture.spec, ([-2.0], [2.0]), 0.04, 0.5, points, values)
    assert ratio > 1.0
