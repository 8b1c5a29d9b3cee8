import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsim.dipole import HybridParams, polar_angle_of_offset
from hybridsim.errors import ClosedFormError, SingularGeometryError
from hybridsim.geometry import (
    EigenTriple,
    Weights,
    branch_sum,
    branch_sum_dtheta,
    characteristic_roots,
    closed_form_coefficients,
    collinearity,
    continue_branches,
    cubic_value,
    curl_bz,
    eigen_structure,
    geometric_field,
    lambda_gradient,
    local_angles,
    spin_eigen_structure,
    vector_potential,
)
from hybridsim.lindblad import spin_effective_hamiltonian, spin_model
from hybridsim.quantum import eig_full


def matched(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return min(np.max(np.abs(a[list(p)] - b)) for p in itertools.permutations(range(len(a))))


def test_roots_at_zero_gamma():
    assert np.allclose(characteristic_roots(0.0, 0.7), [2, 0, -2], atol=1e-14)


@pytest.mark.parametrize("gamma", [0.3, 1.0, 5.0])
def test_equatorial_root(gamma):
    roots = characteristic_roots(gamma, np.pi / 2)
    assert np.min(np.abs(roots + 0.5j * gamma)) < 1e-12


@pytest.mark.parametrize("gamma,theta", list(itertools.product([0, 0.25, 1, 4, 20], [0.1, np.pi / 4, np.pi / 2, 2.7])))
def test_roots_match_spectrum(gamma, theta):
    spectrum = eig_full(spin_effective_hamiltonian(gamma, theta, 0.3).matrix).eigenvalues
    roots = characteristic_roots(gamma, theta)
    assert matched(np.append(roots, 0), spectrum) < 1e-8
    assert np.min(np.abs(spectrum)) < 1e-10
    assert max(abs(cubic_value(r, gamma, theta)) for r in roots) < 1e-10


def test_printed_cubic_disagrees_away_from_unit_gamma():
    theta = 1.0
    assert np.allclose(characteristic_roots(1.0, theta, "printed"), characteristic_roots(1.0, theta))
    printed = characteristic_roots(3.0, theta, "printed")
    spectrum = eig_full(spin_effective_hamiltonian(3.0, theta, 0.0).matrix).eigenvalues
    assert matched(np.append(printed, 0), spectrum) > 1e-2


def test_negative_gamma_rejected():
    with pytest.raises(ValueError):
        characteristic_roots(-1.0, 0.3)


def test_eigen_structure_zero_mode_and_pairing():
    triples = spin_eigen_structure(1.0, np.pi / 3, 0.0)
    assert triples[3].lam == 0
    phi = np.eye(2).reshape(-1)
    assert collinearity(triples[3].left, phi) > 1 - 1e-12
    mat = spin_effective_hamiltonian(1.0, np.pi / 3, 0.0).matrix
    for i, ti in enumerate(triples):
        assert np.linalg.norm(mat @ ti.right - ti.lam * ti.right) < 1e-12
        assert np.linalg.norm(ti.left @ mat - ti.lam * ti.left) < 1e-12
        for k, tk in enumerate(triples):
            if k != i:
                assert abs(ti.left @ tk.right) < 1e-12


def test_eigen_structure_closed_system():
    triples = spin_eigen_structure(0.0, 0.8, 0.4)
    assert np.allclose([t.lam for t in triples], [2, 0, -2, 0], atol=1e-12)
    # both zero modes are diagonal in the energy basis, so their devectorised forms commute with H
    h = spin_model(0.0, 0.8, 0.4).hamiltonian
    for t in (triples[1], triples[3]):
        rho = t.right.reshape(2, 2)
        assert np.abs(rho @ h - h @ rho).max() < 1e-12
    assert collinearity(triples[3].left, np.eye(2).reshape(-1)) > 1 - 1e-12
    # lambda = +-2 vectors are products |E_m>|E_n>^A, i.e. rank one when devectorised
    for t in (triples[0], triples[2]):
        assert np.linalg.svd(t.right.reshape(2, 2), compute_uv=False)[1] < 1e-12


def test_eigen_structure_rejects_bad_shape():
    with pytest.raises(ValueError):
        eigen_structure(np.eye(3))


def test_geometric_factor_scale_invariant():
    t = spin_eigen_structure(1.5, 0.9, 0.2)[0]
    scaled = EigenTriple(t.lam, 3j * t.right, -0.5 * t.left, complex((3j * t.right) @ (-0.5 * t.left)))
    assert np.isclose(scaled.geometric_factor(), t.geometric_factor(), rtol=1e-13)


def test_closed_form_examples():
    cf = closed_form_coefficients(0.0, np.pi / 2, 0.0, 2.0)
    a, b, _, d = cf.right
    assert np.allclose([a, b, d], [-2, 2, 2])
    for conv in ("printed", "reconciled"):
        cf = closed_form_coefficients(1.3, 0.7, 0.4, characteristic_roots(1.3, 0.7)[0], conv)
        # d = -a survives the reconciliation because (ee, gg) slots are not permuted
        assert cf.right[3] == -cf.right[0]


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.1, np.pi - 0.1), st.floats(-np.pi, np.pi))
def test_reconciled_closed_form_is_eigenvector(gamma, theta, phi):
    mat = spin_effective_hamiltonian(gamma, theta, phi).matrix
    for lam in characteristic_roots(gamma, theta):
        try:
            cf = closed_form_coefficients(gamma, theta, phi, lam, "reconciled")
        except ClosedFormError:
            continue
        assert np.linalg.norm(mat @ cf.right - lam * cf.right) / np.linalg.norm(cf.right) < 1e-8
        assert np.linalg.norm(cf.left @ mat - lam * cf.left) / np.linalg.norm(cf.left) < 1e-8


def test_reference_point_collinearity():
    gamma, theta, phi = 1.0, np.pi / 3, 0.0
    triples = spin_eigen_structure(gamma, theta, phi)
    for t in triples[:3]:
        cf = closed_form_coefficients(gamma, theta, phi, t.lam, "reconciled")
        assert collinearity(cf.right, t.right) > 1 - 1e-8
        printed = closed_form_coefficients(gamma, theta, phi, t.lam, "printed")
        assert 0 <= collinearity(printed.right, t.right) <= 1


def test_closed_form_denominator_guard():
    # lambda chosen so that 2cos(theta) - i gamma/2 - lambda = 0
    with pytest.raises(ClosedFormError):
        closed_form_coefficients(1.0, 0.0, 0.0, 2.0 - 0.5j)


def test_weights_validation():
    Weights((0.2, 0.3, 0.5, 0.0))
    for bad in ((0.5, 0.5), (0.5, 0.6, -0.1, 0.0), (0.3, 0.3, 0.3, 0.0)):
        with pytest.raises(ValueError):
            Weights(bad)


def test_zero_mode_weight_gives_no_field():
    params = HybridParams.normalized(gamma=1.0)
    f = geometric_field(params, Weights((0, 0, 0, 1)), 0.6, 0.8)
    assert f.a_x == f.a_y == f.b_z == 0


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 4))
def test_vector_potential_is_azimuthal(x, y, gamma):
    if np.hypot(x, y) < 0.05:
        return
    params = HybridParams.normalized(gamma=gamma)
    f = geometric_field(params, Weights((0.6, 0.1, 0.3, 0.0)), x, y)
    assert abs(x * f.a_x + y * f.a_y) <= 1e-12 * max(1.0, abs(f.b_z))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 20), st.floats(0.05, np.pi - 0.05), st.floats(-np.pi, np.pi))
def test_equal_weights_cancel(gamma, theta, phi):
    # sum over j <= 3 of (w_eg v_eg - w_ge v_ge)/M_j is the trace of diag(0,1,-1,0) minus the zero-mode term
    triples = spin_eigen_structure(gamma, theta, phi)
    assert abs(branch_sum(Weights(), triples)) < 1e-12


def test_reference_golden_bz():
    # gamma = 1, a = d = 1, equal weights: the branch sum vanishes identically
    params = HybridParams.normalized(gamma=1.0, a=1.0, d=1.0)
    assert abs(geometric_field(params, Weights(), 1.0, 0.0).b_z) < 1e-14


def test_singular_zone():
    params = HybridParams.normalized(gamma=1.0)
    with pytest.raises(SingularGeometryError):
        geometric_field(params, Weights(), 0.0, 0.0)
    with pytest.raises(SingularGeometryError):
        curl_bz(params, Weights(), 1e-8, 0.0)


def test_curl_bz_matches_finite_difference_curl():
    params = HybridParams.normalized(gamma=1.0)
    weights = Weights((0.5, 0.3, 0.2, 0.0))
    h = 1e-5
    for x, y in ((0.7, 0.2), (-1.1, 0.9), (0.3, -1.6)):
        ay = lambda xx: geometric_field(params, weights, xx, y).a_y
        ax = lambda yy: geometric_field(params, weights, x, yy).a_x
        fd = (ay(x + h) - ay(x - h)) / (2 * h) - (ax(y + h) - ax(y - h)) / (2 * h)
        assert abs(curl_bz(params, weights, x, y) - fd) < 1e-6 * abs(fd)


def test_branch_sum_dtheta_matches_finite_difference():
    weights = Weights((0.5, 0.3, 0.2, 0.0))
    gamma, theta, phi, h = 1.2, 0.9, 0.4, 1e-6
    fd = (
        branch_sum(weights, spin_eigen_structure(gamma, theta + h, phi))
        - branch_sum(weights, spin_eigen_structure(gamma, theta - h, phi))
    ) / (2 * h)
    assert np.isclose(branch_sum_dtheta(gamma, theta, phi, weights), fd, rtol=1e-6)


def test_gamma_continuity_at_zero():
    params = HybridParams.normalized(a=1.0, d=1.0)
    weights = Weights((0.5, 0.3, 0.2, 0.0))
    small = geometric_field(params.replace(gamma=1e-6), weights, 1.0, 0.0).b_z
    larger = geometric_field(params.replace(gamma=1e-4), weights, 1.0, 0.0).b_z
    assert abs(larger - small) < 1e-3 * abs(small)


def test_lambda_gradient_structure():
    params = HybridParams.normalized(gamma=1.0, a=1.0, d=1.0)
    assert np.array_equal(lambda_gradient(params, 0.4, 0.3, 4), [0, 0])
    g = lambda_gradient(params, 0.6, 0.8, 2)
    # purely radial: parallel to (x, y)
    assert abs(g[0] * 0.8 - g[1] * 0.6) < 1e-14
    with pytest.raises(ValueError):
        lambda_gradient(params, 1.0, 0.0, 5)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_lambda_gradient_reference_point(j):
    params = HybridParams.normalized(gamma=1.0, a=1.0, d=1.0)
    h = 1e-5

    def lam(x):
        return characteristic_roots(1.0, polar_angle_of_offset(abs(x), 1.0))[j - 1]

    fd = (lam(1.0 + h) - lam(1.0 - h)) / (2 * h)
    assert abs(lambda_gradient(params, 1.0, 0.0, j)[0] - fd) < 1e-6 * abs(fd)


def test_local_angles_phi_offset():
    params = HybridParams.normalized()
    theta, phi = local_angles(params, 0.0, 1.0)
    assert np.isclose(phi, -np.pi / 2)
    assert np.isclose(theta, polar_angle_of_offset(1.0, 1.0))
    assert local_angles(params, 0.0, 0.0)[1] == 0.0


def test_continue_branches():
    prev = np.array([2.0, 0.1j, -2.0])
    cur = np.array([-2.01, 1.99, 0.12j])
    reordered, perm = continue_branches(prev, cur)
    assert perm == [1, 2, 0]
    assert np.allclose(reordered, [1.99, 0.12j, -2.01])


def test_vector_potential_formula():
    triples = spin_eigen_structure(2.0, 1.0, 0.5)
    weights = Weights((1.0, 0.0, 0.0, 0.0))
    f = branch_sum(weights, triples)
    field = vector_potential(weights, triples, 0.3, 0.4)
    assert np.isclose(field.a_x, -f * 0.4 / 0.25) and np.isclose(field.a_y, f * 0.3 / 0.25)
    assert np.isclose(field.b_z, 2 * f / 0.25)


def test_branch_sum_dtheta_at_zero_mode_crossing():
    weights = Weights((0.5, 0.3, 0.2, 0.0))
    at_zero = branch_sum_dtheta(0.0, 0.9, 0.4, weights)
    nearby = branch_sum_dtheta(1e-6, 0.9, 0.4, weights)
    assert abs(at_zero - nearby) < 1e-4 * max(abs(nearby), 1e-12)
