import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.errors import DomainError
from src.problem import (
    DoubleWellDatum,
    LinearDatum,
    MinDatum,
    QuadraticDatum,
    build_problem,
    check_problem,
    classical_quadratic,
    contact_discounted,
    custom_polynomial,
    focusing,
    hamiltonian_jet,
    lagrangian_jet,
    legendre_residual,
)

QUARTIC = [{"coef": 0.5, "p": [2]}, {"coef": 0.25, "p": [4]}]


@pytest.mark.parametrize("spec", [
    classical_quadratic(1),
    contact_discounted(2, 0.7),
    focusing(1, 1.0),
    custom_polynomial(1, QUARTIC, LinearDatum([0.0])),
])
def test_check_problem_passes_on_builtin_families(spec):
    report = check_problem(spec, samples=20, rng=np.random.default_rng(3))
    assert report.passed, report.failures
    assert report.convex
    assert report.max_legendre_residual <= spec.tol_dual


def test_hamiltonian_jet_contact_partials():
    spec = contact_discounted(2, 0.5)
    H = hamiltonian_jet(spec, 0.3, [1.0, -1.0], [2.0, 1.0], 4.0, order=2)
    assert H.value == pytest.approx(0.5 * 5.0 + 0.5 * 4.0)
    assert_allclose(H.p, [2.0, 1.0])
    assert_allclose(H.x, [0.0, 0.0])
    assert H.u == pytest.approx(0.5)
    assert_allclose(H.pp, np.eye(2))


def test_finite_difference_mode_matches_closed_form():
    exact = contact_discounted(1, 1.0)
    fd = contact_discounted(1, 1.0, derivative_mode="finite_difference")
    a = hamiltonian_jet(exact, 0.2, [0.4], [0.9], 0.1, order=2)
    b = hamiltonian_jet(fd, 0.2, [0.4], [0.9], 0.1, order=2)
    assert_allclose(b.grad, a.grad, atol=1e-6)
    assert_allclose(b.hess, a.hess, atol=1e-4)


def test_lagrangian_is_legendre_dual():
    spec = contact_discounted(1, 1.0)
    L = lagrangian_jet(spec, 0.0, [0.0], [1.5], 2.0)
    assert L.value == pytest.approx(0.5 * 1.5 ** 2 - 2.0)
    assert_allclose(L.v, [1.5])
    assert L.u == pytest.approx(-1.0)
    res = legendre_residual(spec, 0.0, [0.0], [1.5], 2.0)
    assert float(res) == pytest.approx(0.0, abs=1e-12)


def test_legendre_lagrangian_for_polynomial_hamiltonian():
    spec = custom_polynomial(1, QUARTIC, LinearDatum([0.0]))
    p = 0.8
    v = p + p ** 3
    L = lagrangian_jet(spec, 0.0, [0.0], [v], 0.0)
    assert_allclose(L.v, [p], atol=1e-10)
    assert L.value == pytest.approx(p * v - (0.5 * p ** 2 + 0.25 * p ** 4), abs=1e-10)


def test_non_finite_partial_raises_domain_error():
    spec = custom_polynomial(1, [{"coef": 1.0, "p": [2]}], LinearDatum([0.0]))
    with pytest.raises(DomainError) as err:
        hamiltonian_jet(spec, 0.0, [0.0], [1e200], 0.0)
    assert err.value.partial is not None


def test_initial_data_derivatives():
    well = DoubleWellDatum(1)
    assert well.value([0.0]) == pytest.approx(-np.log(2.0))
    assert_allclose(well.gradient([0.5]), [-np.tanh(0.5)])
    quad = QuadraticDatum(2, 2.0)
    assert quad.value([1.0, 1.0]) == pytest.approx(-2.0)
    assert_allclose(quad.hessian([0.0, 0.0]), -2.0 * np.eye(2))


def test_double_well_hessian_is_finite_far_out():
    well = DoubleWellDatum(1)
    with np.errstate(over="raise"):
        assert_allclose(well.hessian([800.0]), [[0.0]], atol=1e-300)
    assert_allclose(well.hessian([0.5]), [[-1.0 / np.cosh(0.5) ** 2]])


def test_min_datum_selects_active_piece():
    datum = MinDatum([LinearDatum([1.0]), LinearDatum([-1.0])])
    assert datum.value([2.0]) == pytest.approx(-2.0)
    assert datum.piece_at([2.0]).slope[0] == pytest.approx(-1.0)
    assert datum.piece_at([-2.0]).slope[0] == pytest.approx(1.0)
    assert_allclose(datum.values(np.array([[1.0], [-3.0]])), [-1.0, -3.0])
    assert not datum.is_smooth


def test_build_problem_from_config():
    spec = build_problem({"family": "contact_discounted", "dimension": 2, "discount": 0.3,
                          "datum": {"kind": "min", "pieces": [{"kind": "linear", "slope": [1.0, 0.0]},
                                                              {"kind": "linear", "slope": [0.0, 1.0]}]}})
    assert spec.n == 2
    assert spec.family == "contact_discounted"
    assert spec.initial_datum.kind == "min"
    assert spec.describe()["parameters"] == {"discount": 0.3}


def test_build_problem_rejects_unknown_datum():
    with pytest.raises(ValueError):
        build_problem({"family": "classical_quadratic", "datum": {"kind": "spline"}})


def test_contact_discounted_needs_positive_discount():
    with pytest.raises(ValueError):
        contact_discounted(1, 0.0)
