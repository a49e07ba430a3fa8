import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from destab import numeric_core as nc
from destab.errors import DimensionError, SingularityError


def test_rotation_spectrum_is_conjugate_pair():
    ev = nc.eigenvalues([[0.0, 1.0], [-1.0, 0.0]])
    assert ev[0] == 1j and ev[1] == -1j


def test_diagonal_spectrum_sorted_descending():
    ev = nc.eigenvalues([[-1.0, 0.0], [0.0, -2.0]])
    np.testing.assert_allclose(ev, [-1.0, -2.0])


def test_perturbed_rotation_spectrum():
    ev = nc.eigenvalues([[0.0, 1.0], [-1.0, 0.1]])
    expected = 0.5 * (0.1 + np.sqrt(complex(0.1**2 - 4)))
    assert abs(ev[0] - expected) < 1e-14
    assert ev[1] == np.conj(ev[0])


def test_eigenvalues_reject_rectangular():
    with pytest.raises(DimensionError):
        nc.eigenvalues(np.ones((2, 3)))


def test_empty_matrix_has_empty_spectrum():
    assert nc.eigenvalues(np.zeros((0, 0))).size == 0


@given(st.integers(1, 10), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_eigenvalue_product_matches_determinant(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n)) + 3.0 * np.eye(n)
    ev = nc.eigenvalues(m)
    assert len(ev) == n
    det = np.linalg.det(m)
    assert abs(np.prod(ev) - det) <= 1e-8 * abs(det)
    # real matrix: spectrum closed under conjugation, exactly
    assert sorted(ev, key=lambda z: (z.real, z.imag)) == sorted(np.conj(ev), key=lambda z: (z.real, z.imag))


def test_spectrum_is_deterministic():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((7, 7))
    assert nc.eigenvalues(m).tobytes() == nc.eigenvalues(m.copy()).tobytes()


def test_svd_identity_and_nilpotent():
    _, s, _ = nc.svd(np.eye(2))
    np.testing.assert_allclose(s, [1.0, 1.0])
    u, s, v = nc.svd([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(s, [1.0, 0.0])
    np.testing.assert_allclose(u[:, 0], [1.0, 0.0])
    np.testing.assert_allclose(v[:, 0], [0.0, 1.0])


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_svd_round_trip_and_phase(p, m, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((p, m)) + 1j * rng.standard_normal((p, m))
    u, s, v = nc.svd(a)
    k = min(p, m)
    recon = u[:, :k] @ np.diag(s) @ v[:, :k].conj().T
    assert np.linalg.norm(recon - a) <= 1e-10 * np.linalg.norm(a)
    assert np.linalg.norm(u.conj().T @ u - np.eye(p)) < 1e-10
    assert np.linalg.norm(v.conj().T @ v - np.eye(m)) < 1e-10
    assert np.all(np.diff(s) <= 0)
    for j in range(k):
        top = u[np.argmax(np.abs(u[:, j])), j]
        assert abs(top.imag) < 1e-12 and top.real > 0


def test_solve_examples():
    b = np.array([[1.0], [2.0]])
    np.testing.assert_array_equal(nc.solve(np.eye(2), b), b)
    x = nc.solve(2 * np.eye(2) - np.array([[0.0, 1.0], [-1.0, -1.0]]), np.array([0.0, 1.0]))
    np.testing.assert_allclose(x, [1 / 7, 2 / 7], rtol=1e-14)


def test_solve_singular_raises():
    with pytest.raises(SingularityError):
        nc.solve(np.zeros((2, 2)), np.ones(2))


def test_determinant_examples():
    assert nc.determinant([[3.5 - 2j]]) == 3.5 - 2j
    assert nc.determinant(np.eye(2) - np.array([[1.0, 0.0], [0.0, 0.0]])) == 0.0
    assert abs(nc.determinant(2 * np.eye(2) - np.array([[0.0, 1.0], [-1.0, 0.0]])) - 5.0) < 1e-14
    assert nc.determinant(np.zeros((0, 0))) == 1.0
