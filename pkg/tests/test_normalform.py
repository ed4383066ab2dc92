import numpy as np
import pytest

from modalpf.eigensystem import eigendecompose
from modalpf.errors import (
    LinearPartMismatch,
    NoConvergence,
    RegimeNotEstablished,
    SmallDivisor,
)
from modalpf.normalform import (
    compute_normal_form,
    evaluate_map,
    invert_map,
    map_to_original,
    mode_in_state_nonlinear,
    to_modal,
)
from modalpf.participation import classic_pf
from modalpf.polynomial import PolynomialMap, PolynomialVectorField, pderiv
from modalpf.resonance import resonant_monomials

from conftest import nl1_field, textbook_field


def _jacobian(phi: PolynomialMap, z):
    comps = phi.components()
    n = phi.n
    J = np.empty((n, n), dtype=complex)
    for s in range(n):
        for j in range(n):
            d = pderiv(comps[s], j)
            J[s, j] = sum(c * np.prod(z ** np.array(m)) for m, c in d.items())
    return J


def _conjugacy_defect(nf, g, z):
    """|| Dphi(z) g(z) - Lambda phi(z) - w(phi(z)) ||: zero up to degree N for a correct phi."""
    y = evaluate_map(nf.phi, z)
    lhs = _jacobian(nf.phi, z) @ g(z)
    rhs = nf.lambdas * y + (nf.w(y) if nf.w.terms else 0)
    return float(np.abs(lhs - rhs).max())


def _diag_field(lams, nonlinear):
    n = len(lams)
    terms = {(s, tuple(int(j == s) for j in range(n))): complex(l) for s, l in enumerate(lams)}
    terms.update(nonlinear)
    return PolynomialVectorField(n, max(sum(m) for _, m in terms), terms)


# ---- worked example ----------------------------------------------------------------


def test_textbook_transform():
    f = textbook_field()
    E = eigendecompose(f.linear_part())
    g = to_modal(f, E)
    nf = compute_normal_form(g, 4)
    assert nf.linearizes
    # modes sorted as (1, -1): z = (z_state, y_state)
    assert set(nf.phi.terms) == {(0, (0, 2))}
    assert abs(nf.phi.coefficient(0, (0, 2)) - 1 / 3) < 1e-15
    phi_x = map_to_original(nf.phi, E)
    assert set(phi_x.terms) == {(1, (2, 0))}
    assert abs(phi_x.coefficient(1, (2, 0)) - 1 / 3) < 1e-15


def test_textbook_already_modal_up_to_ordering():
    f = textbook_field()
    g = to_modal(f, eigendecompose(f.linear_part()))
    assert g.terms == {(0, (1, 0)): 1.0, (1, (0, 1)): -1.0, (0, (0, 2)): 1.0}


def test_linear_input_gives_identity():
    nf = compute_normal_form(_diag_field([-1.0, -3.0], {}), 5)
    assert nf.phi.terms == {} and nf.linearizes


def test_resonant_term_kept():
    # lambda = (2, 1) and the single term z_2^2 e_1 is resonant
    nf = compute_normal_form(_diag_field([2.0, 1.0], {(0, (0, 2)): 1.0}), 4)
    assert nf.phi.terms == {}
    assert nf.w.terms == {(0, (0, 2)): 1.0}
    assert not nf.linearizes


def test_degree_two_coefficients_closed_form():
    rng = np.random.default_rng(3)
    lam = np.array([-1.0, -2.7, -4.1])
    quad = {}
    for s in range(3):
        for m in [(2, 0, 0), (1, 1, 0), (0, 1, 1), (0, 0, 2)]:
            quad[(s, m)] = rng.standard_normal()
    nf = compute_normal_form(_diag_field(lam, quad), 2)
    for (s, m), c in quad.items():
        assert abs(nf.stages[2][(s, m)] - c / (lam[s] - np.dot(m, lam))) <= 1e-15 * abs(c / (lam[s] - np.dot(m, lam)))


@pytest.mark.parametrize("N", [2, 3, 4])
def test_pushforward_defect_scales_with_truncation(N):
    rng = np.random.default_rng(N)
    lam = np.array([-1.0, -2.3 + 0.7j, -2.3 - 0.7j])
    nonlinear = {}
    for s in range(3):
        for m in [(2, 0, 0), (1, 1, 0), (0, 1, 1), (1, 0, 2), (0, 3, 0), (1, 1, 1)]:
            nonlinear[(s, m)] = complex(rng.standard_normal(), rng.standard_normal())
    g = _diag_field(lam, nonlinear)
    nf = compute_normal_form(g, N)
    assert nf.linearizes
    u = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    u /= np.linalg.norm(u)
    d1 = _conjugacy_defect(nf, g, 0.02 * u)
    d2 = _conjugacy_defect(nf, g, 0.01 * u)
    assert d1 / d2 >= 0.8 * 2 ** (N + 1)


def test_pushforward_coefficients_vanish_relative():
    # nl1-like but non-resonant spectrum: every removed coefficient must be gone to 1e-9
    g = _diag_field([-1.0, -np.sqrt(7.0)], {(0, (1, 1)): 2.0, (1, (2, 0)): -1.5, (0, (0, 3)): 0.7})
    nf = compute_normal_form(g, 6)
    assert nf.linearizes
    z = np.array([1e-3, -2e-3])
    assert _conjugacy_defect(nf, g, z) < 1e-9 * 1e-3


def test_w_monomials_are_resonant():
    f = nl1_field()
    E = eigendecompose(f.linear_part())
    nf = compute_normal_form(to_modal(f, E), 5)
    allowed = {(s, m) for m, s in resonant_monomials(E.eigenvalues, 5)}
    assert set(nf.w.terms) <= allowed
    assert (0, (0, 3)) in nf.w.terms  # lambda_1 = 3 lambda_2


def test_small_divisor_refused():
    g = _diag_field([2.0, 1.0], {(0, (0, 2)): 1.0})
    with pytest.raises(SmallDivisor):
        compute_normal_form(g, 3, resonant=set())
    nf = compute_normal_form(g, 3, resonant={(0, (0, 2))})
    assert nf.w.terms == {(0, (0, 2)): 1.0}


def test_near_resonance_is_removed_above_tolerance():
    g = _diag_field([2.0 + 1e-6, 1.0], {(0, (0, 2)): 1.0})
    nf = compute_normal_form(g, 2)
    assert nf.linearizes and abs(nf.small_divisor_floor - 1e-6) < 1e-12


def test_truncation_bounds():
    g = _diag_field([-1.0, -3.5], {})
    for N in (1, 9):
        with pytest.raises(ValueError):
            compute_normal_form(g, N)


def test_modal_input_required():
    with pytest.raises(ValueError):
        compute_normal_form(PolynomialVectorField.linear([[1.0, 1.0], [0.0, 3.0]]), 3)


# ---- to_modal ----------------------------------------------------------------------


def test_to_modal_point_equivalence():
    f = nl1_field()
    E = eigendecompose(f.linear_part())
    g = to_modal(f, E)
    np.testing.assert_allclose(np.diag(g.linear_part()), E.eigenvalues, atol=0)
    X = np.random.default_rng(1).uniform(-0.2, 0.2, (50, 2))
    np.testing.assert_allclose(g(X @ E.left.T) @ E.right.T, f(X), atol=1e-13)
    # one quadratic monomial in x gives at most n * 3 quadratic monomials in z
    single = PolynomialVectorField(2, 2, {**{k: v for k, v in f.terms.items() if sum(k[1]) == 1},
                                          (0, (1, 1)): 1.0})
    assert len(to_modal(single, E).nonlinear_terms()) <= 2 * 3


def test_to_modal_rejects_wrong_linear_part():
    f = nl1_field()
    with pytest.raises(LinearPartMismatch):
        to_modal(f, eigendecompose(np.diag([1.0, 3.0])))


# ---- evaluation and inversion ------------------------------------------------------


def test_invert_examples():
    phi = PolynomialMap(2, 2, {(1, (2, 0)): 1 / 3})
    np.testing.assert_allclose(evaluate_map(phi, [3.0, 0.0]), [3.0, 3.0])
    np.testing.assert_allclose(invert_map(phi, [3.0, 3.0]), [3.0, 0.0], atol=1e-12)
    np.testing.assert_array_equal(invert_map(PolynomialMap.identity(2), [0.4, -0.1]), [0.4, -0.1])


def test_invert_round_trip_random_points():
    f = nl1_field()
    E = eigendecompose(f.linear_part())
    nf = compute_normal_form(to_modal(f, E), 4)
    rng = np.random.default_rng(6)
    Z = rng.standard_normal((100, 2))
    Z *= 0.1 * rng.uniform(0, 1, (100, 1)) / np.linalg.norm(Z, axis=1, keepdims=True)
    for z in Z:
        back = invert_map(nf.phi, evaluate_map(nf.phi, z), tol=1e-13)
        assert np.abs(back - z).max() <= 1e-12


def test_invert_far_point_fails():
    phi = PolynomialMap(1, 2, {(0, (2,)): 1.0})
    with pytest.raises(NoConvergence):
        invert_map(phi, [10.0], max_iter=50)


def test_map_to_original_consistent_for_complex_modes():
    A = np.array([[-0.2, 1.0], [-1.5, -0.3]])
    f = PolynomialVectorField(2, 2, {(0, (1, 0)): -0.2, (0, (0, 1)): 1.0, (1, (1, 0)): -1.5,
                                     (1, (0, 1)): -0.3, (0, (2, 0)): 0.4, (1, (1, 1)): -0.8})
    E = eigendecompose(A)
    nf = compute_normal_form(to_modal(f, E), 3)
    phi_x = map_to_original(nf.phi, E)
    assert all(np.imag(c) == 0 for c in phi_x.terms.values())
    x = np.array([0.05, -0.03])
    direct = E.right @ evaluate_map(nf.phi, E.left @ x)
    np.testing.assert_allclose(phi_x(x), direct, atol=1e-15)


# ---- nonlinear participation --------------------------------------------------------


def test_nonlinear_participation_equals_linear():
    for f in (nl1_field(), textbook_field()):
        E = eigendecompose(f.linear_part())
        nf = compute_normal_form(to_modal(f, E), 4)
        pm = mode_in_state_nonlinear(f, E, nf)
        np.testing.assert_array_equal(pm.values, classic_pf(E).values)
        assert pm.provenance["theorem"] == "HartmanGrobman"


def test_nonlinear_participation_nonresonant_uses_poincare():
    f = PolynomialVectorField(2, 2, {(0, (1, 0)): -1.0, (1, (0, 1)): -np.sqrt(2.0), (1, (2, 0)): 1.0})
    E = eigendecompose(f.linear_part())
    pm = mode_in_state_nonlinear(f, E, compute_normal_form(to_modal(f, E), 4))
    assert pm.provenance["theorem"] in ("Poincare", "PoincareSiegel")
    assert pm.provenance["normal_form_linearizes"]


def test_psi_zero_is_classic():
    f = PolynomialVectorField.linear([[1.0, 1.0], [0.0, 3.0]])
    E = eigendecompose(f.linear_part())
    pm = mode_in_state_nonlinear(f, E, compute_normal_form(to_modal(f, E), 3))
    np.testing.assert_array_equal(pm.values, classic_pf(E).values)


def test_zero_eigenvalue_not_established():
    # linear part of the singular example has eigenvalue 0: always resonant, not hyperbolic
    f = PolynomialVectorField(2, 2, {(0, (1, 0)): 1.0, (0, (0, 1)): 1.0, (1, (1, 0)): -2.0,
                                     (1, (0, 1)): -2.0, (0, (2, 0)): 1.0})
    E = eigendecompose(f.linear_part())
    nf = compute_normal_form(to_modal(f, E), 3)
    with pytest.raises(RegimeNotEstablished):
        mode_in_state_nonlinear(f, E, nf)
