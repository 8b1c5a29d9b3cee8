import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hybridsim.errors import DimensionError, EigenError
from hybridsim.geometry import characteristic_roots
from hybridsim.lindblad import spin_effective_hamiltonian
from hybridsim.quantum import (
    KET_E,
    KET_G,
    dagger,
    degenerate_groups,
    eig_full,
    eigen_residuals,
    expectation,
    is_hermitian,
    kron,
    pauli,
    projector,
    sort_key,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def complex_matrices(n):
    return st.tuples(arrays(float, (n, n), elements=finite), arrays(float, (n, n), elements=finite)).map(
        lambda p: p[0] + 1j * p[1]
    )


def test_pauli_conventions():
    assert np.array_equal(pauli("z"), [[1, 0], [0, -1]])
    assert np.array_equal(pauli("minus"), [[0, 0], [1, 0]])
    assert np.array_equal(pauli("minus") @ KET_E, KET_G)
    for axis in "xyz":
        assert np.allclose(pauli(axis) @ pauli(axis), np.eye(2))
    with pytest.raises(ValueError):
        pauli("w")


def test_pauli_returns_copies():
    m = pauli("x")
    m[0, 0] = 5
    assert pauli("x")[0, 0] == 0


def test_kron_ordering():
    z, eye = pauli("z"), np.eye(2)
    assert np.array_equal(kron(eye, z), np.diag([1, -1, 1, -1]))
    assert np.array_equal(kron(z, eye), np.diag([1, 1, -1, -1]))
    assert kron(z, pauli("x")).shape == (4, 4)


def test_dagger_examples():
    assert np.array_equal(dagger(pauli("minus")), pauli("plus"))
    assert np.array_equal(dagger(1j * np.eye(2)), -1j * np.eye(2))


@given(complex_matrices(3))
def test_dagger_involution(m):
    assert np.array_equal(dagger(dagger(m)), m)


@given(complex_matrices(2), complex_matrices(3), complex_matrices(2))
def test_kron_associative(a, b, c):
    assert np.allclose(kron(kron(a, b), c), kron(a, kron(b, c)), atol=1e-12, rtol=0)


def test_expectation_examples():
    assert expectation(KET_E, pauli("z")) == 1
    assert expectation(np.eye(2) / 2, pauli("z")) == 0
    assert expectation(KET_G, projector(KET_E)) == 0
    with pytest.raises(DimensionError):
        expectation(np.ones(3), pauli("z"))


def test_eig_full_diagonal():
    es = eig_full(np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(es.eigenvalues, [3, 2, 1])
    assert np.allclose(np.abs(es.right), np.eye(3)[:, ::-1])


def test_eig_full_pauli_x():
    es = eig_full(pauli("x"))
    assert np.allclose(es.eigenvalues, [1, -1])


def test_eig_full_matches_cubic_roots():
    mat = spin_effective_hamiltonian(1.0, np.pi / 3, 0.0).matrix
    es = eig_full(mat)
    expected = np.sort_complex(np.append(characteristic_roots(1.0, np.pi / 3), 0))
    assert np.allclose(np.sort_complex(es.eigenvalues), expected, atol=1e-10, rtol=0)
    assert max(eigen_residuals(mat, es)) < 1e-12


def test_eig_full_degenerate_cluster_is_biorthogonal():
    m = np.diag([2.0, 2.0, -1.0]).astype(complex)
    m[0, 2] = 0.5
    es = eig_full(m)
    pair = dagger(es.left) @ es.right
    assert np.allclose(pair - np.diag(np.diag(pair)), 0, atol=1e-12)
    assert max(eigen_residuals(m, es)) < 1e-14


def test_eig_full_rejects_bad_input():
    with pytest.raises(DimensionError):
        eig_full(np.ones((2, 3)))
    with pytest.raises(EigenError):
        eig_full(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(EigenError):
        eig_full(np.array([[1.0, 1.0], [0.0, 1.0]]))  # Jordan block


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8).flatmap(complex_matrices))
def test_hermitian_spectrum_real_and_left_equals_right(m):
    h = m + dagger(m)
    es = eig_full(h)
    assert np.max(np.abs(es.eigenvalues.imag)) < 1e-9 * max(1.0, np.linalg.norm(h))
    # for Hermitian input each left vector is its right vector up to a phase
    overlaps = np.abs(np.einsum("ij,ij->j", es.left.conj(), es.right))
    assert np.allclose(overlaps, 1.0, atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(complex_matrices))
def test_eigenvalue_sum_is_trace(m):
    try:
        es = eig_full(m)
    except EigenError:
        return  # random defective clusters are legitimately rejected
    tr = np.trace(m)
    assert abs(es.eigenvalues.sum() - tr) <= 1e-9 * max(1.0, abs(tr), np.linalg.norm(m))


def test_sort_key_and_groups():
    vals = np.array([1 + 1j, 2, 1 - 1j, 2 + 1e-12])
    assert list(vals[sort_key(vals)].imag) == [0, 0, 1, -1]
    assert degenerate_groups(vals) == [[0], [1, 3], [2]]


def test_is_hermitian():
    assert is_hermitian(pauli("y"))
    assert not is_hermitian(pauli("plus"))
