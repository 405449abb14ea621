import numpy as np
import pytest
from numpy.testing import assert_allclose

from scipy.optimize import brentq

from src.characteristics import SampledCurve, integrate_lie
from src.characteristics.flow import caratheodory_values
from src.cut_locus import (
    BranchSheet,
    ClassifyTolerances,
    Kind,
    Perturbation,
    accessory_second_variation,
    classify_map,
    classify_point,
    conjugate_time,
    conjugate_witness,
    hessian_blowup_probe,
    local_branches,
    persistence_probe,
)
from src.errors import PreconditionError, ShootingError
from src.problem import DoubleWellDatum, LinearDatum, classical_quadratic, contact_discounted, focusing
from src.singular import two_branch_fixture


@pytest.fixture
def fixture():
    return two_branch_fixture(1.5, -0.5)


def test_small_time_focusing_is_regular():
    frame = classify_map(focusing(1, 1.0), [0.1, 0.2], np.linspace(-1.0, 1.0, 5)[:, None], progress=False)
    assert len(frame) == 10
    assert (frame["kind"] == Kind.REGULAR.value).all()
    assert list(frame.columns[:2]) == ["t", "x1"]


def test_interface_point_is_irregular(fixture):
    result = classify_point(fixture.spec, 0.5, fixture.interface(0.5))
    assert result.kind is Kind.IRREGULAR_ONLY
    assert result.k == 2
    assert result.kind.singular


def test_focal_point_is_conjugate():
    result = classify_point(focusing(1, 1.0), 1.0, [0.0])
    assert result.kind is Kind.CONJUGATE_ONLY
    assert "root continuum" in result.diagnostic


def test_unknown_when_shooting_finds_nothing(mocker):
    mocker.patch("src.bolza.shooting.newton_root", return_value=None)
    result = classify_point(classical_quadratic(1), 1.0, [0.0])
    assert result.kind is Kind.UNKNOWN
    assert not result.kind.singular
    assert result.diagnostic


@pytest.mark.parametrize("z", [-0.9, -0.3, 0.2, 0.7])
def test_focusing_conjugate_time(z):
    found = conjugate_time(focusing(1, 1.0), [z], 1.5)
    assert found is not None
    assert found.t_star == pytest.approx(1.0, abs=1e-6)
    assert found.verified


def test_no_conjugate_time_for_linear_datum():
    assert conjugate_time(classical_quadratic(1, LinearDatum([1.0])), [0.3], 2.0) is None


def test_conjugate_time_rejects_non_positive_horizon():
    with pytest.raises(PreconditionError):
        conjugate_time(focusing(1), [0.1], 0.0)


def test_hessian_blowup_matches_closed_form():
    times = 1.0 - 2.0 ** -np.arange(1, 11)
    series = hessian_blowup_probe(focusing(1, 1.0), [0.5], 1.0, times)
    assert series.truncated_at is None
    assert series.increasing
    assert_allclose(series.norms, 1.0 / (1.0 - times), rtol=1e-6)


def test_conjugate_witness_annihilates_second_variation():
    witness = conjugate_witness(focusing(1, 1.0), [0.5], 1.0, 1.5)
    assert abs(witness.J_star) <= 1e-6
    assert witness.corner >= 0.4
    assert witness.to_dict()["s_bar"] == 1.0


def test_witness_needs_kernel_direction():
    with pytest.raises(PreconditionError):
        conjugate_witness(focusing(1, 1.0), [0.5], 0.5, 1.5)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_second_variation_nonnegative_along_minimizer(k):
    spec = classical_quadratic(1, LinearDatum([1.0]))
    traj = integrate_lie(spec, [-0.5], 1.0)
    alpha = Perturbation.from_function(traj.s, lambda s: 0.3 * np.sin(k * np.pi * s),
                                       lambda s: 0.3 * k * np.pi * np.cos(k * np.pi * s))
    report = accessory_second_variation(spec, traj, alpha)
    assert report.nonnegative
    assert report.value == pytest.approx(0.5 * (0.3 * k * np.pi) ** 2, rel=1e-3)


@pytest.mark.parametrize("spec", [
    classical_quadratic(1, DoubleWellDatum(1)),
    contact_discounted(1, 0.5, DoubleWellDatum(1)),
    contact_discounted(1, 1.0, DoubleWellDatum(1)),
])
def test_second_variation_matches_finite_differences(spec):
    t, eps = 0.6, 1e-3
    traj = integrate_lie(spec, [0.7], t)
    curve = traj.as_curve(spec)
    s = curve.s

    def terminal_value(alpha, alpha_dot, e):
        moved = SampledCurve(s, curve.xi + e * alpha[:, None], curve.velocity + e * alpha_dot[:, None])
        return caratheodory_values(spec, moved, spec.initial_datum.value(moved.xi[0]), substeps=2)[-1]

    rng = np.random.default_rng(11)
    for _ in range(3):
        c = rng.normal(scale=0.3, size=3)
        alpha = c[0] * (1.0 - s / t) + c[1] * np.sin(np.pi * s / t) + c[2] * np.sin(2.0 * np.pi * s / t)
        alpha_dot = (-c[0] + c[1] * np.pi * np.cos(np.pi * s / t)
                     + 2.0 * c[2] * np.pi * np.cos(2.0 * np.pi * s / t)) / t
        report = accessory_second_variation(spec, traj, Perturbation(s, alpha, alpha_dot))
        fd = (terminal_value(alpha, alpha_dot, eps) - 2.0 * terminal_value(alpha, alpha_dot, 0.0)
              + terminal_value(alpha, alpha_dot, -eps)) / eps ** 2
        assert report.value == pytest.approx(fd, rel=1e-3, abs=1e-4)
        assert report.nonnegative


def test_second_variation_requires_vanishing_endpoint():
    spec = classical_quadratic(1)
    traj = integrate_lie(spec, [0.0], 1.0)
    alpha = Perturbation.from_function(traj.s, lambda s: 1.0, lambda s: 0.0)
    with pytest.raises(PreconditionError):
        accessory_second_variation(spec, traj, alpha)


def test_local_branches_and_sheets(fixture):
    x0 = fixture.interface(0.5)
    classification = classify_point(fixture.spec, 0.5, x0)
    branches = local_branches(fixture.spec, 0.5, x0, classification)
    assert len(branches) == 2
    assert branches[0].value == pytest.approx(branches[1].value, abs=1e-10)
    slopes = sorted(b.p[0] for b in branches)
    assert_allclose(slopes, [-0.5, 1.5], atol=1e-10)

    sheets = BranchSheet.from_branches(fixture.spec, branches)
    moved = [s.evaluate(0.6, x0 + 0.1) for s in sheets]
    for sheet, branch in zip(sheets, moved):
        a = fixture.a1 if branch.p[0] > 0 else fixture.a2
        assert branch.value == pytest.approx(fixture.branch_value(a, 0.6, x0 + 0.1), abs=1e-8)


def test_local_branches_refuse_conjugate_point():
    spec = focusing(1, 1.0)
    classification = classify_point(spec, 1.0, [0.0])
    with pytest.raises(PreconditionError):
        local_branches(spec, 1.0, [0.0], classification)


def test_sheet_raises_when_root_is_lost(mocker, fixture):
    sheet = BranchSheet(fixture.spec, [0.5])
    mocker.patch("src.cut_locus.branches.newton_root", return_value=None)
    with pytest.raises(ShootingError):
        sheet.evaluate(0.5, [0.25])


@pytest.mark.parametrize("eps", [0.05, 0.1])
def test_persistence_from_interface_point(fixture, eps):
    t0 = 0.5
    result = persistence_probe(fixture.spec, t0, fixture.interface(t0), eps, 1.0,
                               tolerances=ClassifyTolerances())
    assert result.found
    assert result.t == pytest.approx(t0 + eps)
    assert abs(result.x[0] - fixture.interface(t0 + eps)[0]) <= 2.0 * eps / 8.0


def test_persistence_preconditions(fixture):
    with pytest.raises(PreconditionError):
        persistence_probe(fixture.spec, 0.5, fixture.interface(0.5), 0.5, 4.0)
    with pytest.raises(PreconditionError):
        persistence_probe(classical_quadratic(1), 0.5, [0.0], 0.1, 1.0)


# -------------------------------
# Double Well
# -------------------------------
@pytest.fixture(scope="module")
def double_well():
    return classical_quadratic(1, DoubleWellDatum(1))


def test_double_well_after_focal_time_is_irregular(double_well):
    result = classify_point(double_well, 2.0, [0.0])
    assert result.kind is Kind.IRREGULAR_ONLY
    assert result.k == 2
    # X(2; z) = z - 2 tanh(z) = 0
    z_star = brentq(lambda z: z - 2.0 * np.tanh(z), 1.0, 3.0)
    seeds = sorted(m.seed[0] for m in result.minimizers.minimizing)
    assert_allclose(seeds, [-z_star, z_star], atol=1e-6)


def test_double_well_focal_point_is_conjugate(double_well):
    result = classify_point(double_well, 1.0, [0.0])
    assert result.kind is Kind.CONJUGATE_ONLY


@pytest.mark.parametrize("eps", [0.05, 0.1])
def test_persistence_from_double_well_focal_point(double_well, eps):
    result = persistence_probe(double_well, 1.0, [0.0], eps, 1.0, points=5)
    assert result.found
    assert result.t == pytest.approx(1.0 + eps)
    assert abs(result.x[0]) <= eps
    assert result.k >= 2
