import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.bolza import (
    ShootingOptions,
    dpp_certificate,
    fundamental_solution,
    fundamental_solution_refined,
    semiconcavity_probe,
    shoot_minimizers,
    value,
    value_by_curve_optimization,
    zigzag_curve,
)
from src.characteristics import SampledCurve
from src.errors import PreconditionError, ShootingError
from src.problem import LinearDatum, classical_quadratic, contact_discounted, focusing
from src.singular import two_branch_fixture


def classical_value(a, t, x):
    return a * x - 0.5 * a * a * t


def contact_value(a, lam, t, x):
    decay = np.exp(-lam * t)
    return decay * a * x - a * a * decay * (1.0 - decay) / (2.0 * lam)


def test_classical_linear_value_closed_form():
    spec = classical_quadratic(1, LinearDatum([0.8]))
    rng = np.random.default_rng(11)
    for _ in range(8):
        t, x = rng.uniform(0.1, 2.0), rng.uniform(-1.0, 1.0)
        u, mset = value(spec, t, [x])
        assert u == pytest.approx(classical_value(0.8, t, x), abs=1e-5)
        assert mset.k == 1


def test_contact_value_at_reference_point():
    spec = contact_discounted(1, 1.0, LinearDatum([1.0]))
    u, mset = value(spec, 1.0, [1.0])
    assert u == pytest.approx(contact_value(1.0, 1.0, 1.0, 1.0), abs=1e-8)
    assert u == pytest.approx(0.251607, abs=1e-6)
    assert mset.minimizing[0].seed[0] == pytest.approx(np.exp(-1.0), abs=1e-8)


def test_contact_value_closed_form_random_points():
    spec = contact_discounted(1, 0.5, LinearDatum([1.2]))
    rng = np.random.default_rng(5)
    for _ in range(6):
        t, x = rng.uniform(0.1, 2.0), rng.uniform(-1.0, 1.0)
        assert value(spec, t, [x])[0] == pytest.approx(contact_value(1.2, 0.5, t, x), abs=1e-5)


def test_two_branch_point_has_two_minimizers():
    fixture = two_branch_fixture(1.5, -0.5)
    x = fixture.interface(0.5)
    mset = shoot_minimizers(fixture.spec, 0.5, x)
    assert mset.k == 2
    assert mset.u == pytest.approx(fixture.value(0.5, x), abs=1e-10)
    seeds = sorted(e.seed[0] for e in mset.minimizing)
    assert_allclose(seeds, [-0.5, 0.5], atol=1e-8)


def test_focal_point_is_root_continuum():
    mset = shoot_minimizers(focusing(1, 1.0), 1.0, [0.0], grid_per_dim=7)
    assert mset.root_continuum
    assert mset.min_abs_det <= 1e-7


def test_value_raises_when_no_root(mocker):
    mocker.patch("src.bolza.shooting.newton_root", return_value=None)
    with pytest.raises(ShootingError):
        value(classical_quadratic(1), 1.0, [0.0])


def test_shooting_rejects_non_positive_time():
    with pytest.raises(PreconditionError):
        shoot_minimizers(classical_quadratic(1), 0.0, [0.0])


def test_minimizer_frame_columns():
    mset = shoot_minimizers(classical_quadratic(1), 1.0, [0.2], options=ShootingOptions(grid_per_dim=5))
    frame = mset.to_frame()
    assert {"z1", "U", "residual", "det_Xz", "minimizing"} <= set(frame.columns)
    assert frame["minimizing"].any()


def test_fundamental_solution_classical_straight_line():
    spec = classical_quadratic(1, LinearDatum([0.0]))
    result = fundamental_solution(spec, 0.0, 2.0, [0.0], [1.0], 0.3, nodes=5)
    assert result.cost == pytest.approx(0.25, abs=1e-8)
    assert result.certified
    assert_allclose(result.curve.xi[:, 0], np.linspace(0.0, 1.0, 5), atol=1e-5)


def test_fundamental_solution_refinement_lowers_cost():
    spec = contact_discounted(1, 1.0, LinearDatum([0.0]))
    refined = fundamental_solution_refined(spec, 0.0, 1.0, [0.0], [1.0], 0.5, levels=(3, 5, 9))
    assert len(refined.costs) == 3
    assert refined.costs[-1] <= refined.costs[0] + 1e-8
    assert refined.extrapolated == pytest.approx(refined.costs[-1], abs=5e-3)


@pytest.mark.parametrize("nodes", [9, 17])
def test_contact_fundamental_solution_stays_put(nodes):
    spec = contact_discounted(1, 1.0)
    result = fundamental_solution(spec, 0.0, 1.0, [0.0], [0.0], 1.0, nodes=nodes)
    assert result.cost == pytest.approx(np.exp(-1.0) - 1.0, abs=1e-5)
    assert_allclose(result.curve.xi[:, 0], 0.0, atol=1e-4)


def test_fundamental_solution_preconditions():
    spec = classical_quadratic(1)
    with pytest.raises(PreconditionError):
        fundamental_solution(spec, 1.0, 1.0, [0.0], [0.0], 0.0)
    with pytest.raises(PreconditionError):
        fundamental_solution(spec, 0.0, 1.0, [0.0], [0.0], 0.0, nodes=2)


def test_curve_optimization_confirms_shooting():
    spec = classical_quadratic(1, LinearDatum([1.0]))
    result = value_by_curve_optimization(spec, 1.0, [0.5], nodes=9)
    assert result.value == pytest.approx(classical_value(1.0, 1.0, 0.5), abs=1e-4)
    assert result.y_star[0] == pytest.approx(-0.5, abs=1e-3)


def test_dpp_tight_along_minimizer_and_holds_on_zigzag():
    spec = classical_quadratic(1, LinearDatum([1.0]))
    # minimizer through (1, 0.5) starts at y = -0.5
    s = np.linspace(0.0, 1.0, 11)
    minimizer = SampledCurve(s, (-0.5 + s)[:, None], np.ones((s.size, 1)))
    certificate = dpp_certificate(spec, minimizer, 0.2, 1.0)
    assert certificate.tight
    zigzag = dpp_certificate(spec, zigzag_curve(0.2, 1.0, [0.5], teeth=4, slope=2.0), 0.2, 1.0)
    assert zigzag.holds
    assert zigzag.slack > 0.0


def test_unit_slope_zigzag_has_half_unit_slack():
    spec = classical_quadratic(1, LinearDatum([0.0]))
    certificate = dpp_certificate(spec, zigzag_curve(0.0, 1.0, [0.0], teeth=4), 0.0, 1.0)
    assert certificate.holds
    assert certificate.slack == pytest.approx(0.5, abs=1e-6)


def test_dpp_rejects_reversed_interval():
    curve = zigzag_curve(0.0, 1.0, [0.0], teeth=2)
    with pytest.raises(PreconditionError):
        dpp_certificate(classical_quadratic(1), curve, 0.8, 0.5)


def test_semiconcavity_probe_on_linear_problem():
    spec = classical_quadratic(1, LinearDatum([0.5]))
    report = semiconcavity_probe(spec, (0.2, 1.0), ([-1.0], [1.0]), samples=6,
                                 options=ShootingOptions(grid_per_dim=3))
    assert report.passed
    assert len(report.samples) == 6
