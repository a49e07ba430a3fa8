"""Dense matrix kernel: spectra, SVD, linear solves and determinants.

Everything here is a pure function of its inputs. Matrices are plain
numpy arrays; real inputs stay real where that matters (eigenvalues of a
real matrix come out in exact conjugate pairs).
"""

import warnings

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericError, SingularityError

COND_LIMIT = 1e14


def _as_square(m, dtype=None):
    m = np.asarray(m, dtype=dtype)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    return m


def sort_spectrum(values):
    """Order eigenvalues by descending real part, ties by descending imaginary part."""
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((-values.imag, -values.real))
    return values[order]


def eigenvalues(m):
    """All eigenvalues of a real square matrix, with algebraic multiplicity.

    Computed from the real Schur form: 1x1 diagonal blocks give real
    eigenvalues, 2x2 blocks give a conjugate pair that is symmetric to the
    last bit.
    """
    m = _as_square(m, dtype=float)
    n = m.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    try:
        t = scipy.linalg.schur(m, output="real")[0]
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"real Schur decomposition did not converge: {exc}") from exc

    out = []
    i = 0
    while i < n:
        if i + 1 < n and t[i + 1, i] != 0.0:
            a, b = t[i, i], t[i, i + 1]
            c, d = t[i + 1, i], t[i + 1, i + 1]
            half_tr = 0.5 * (a + d)
            disc = (0.5 * (a - d)) ** 2 + b * c
            if disc < 0.0:
                im = np.sqrt(-disc)
                out.append(complex(half_tr, im))
                out.append(complex(half_tr, -im))
            else:
                r = np.sqrt(disc)
                out.append(complex(half_tr + r, 0.0))
                out.append(complex(half_tr - r, 0.0))
            i += 2
        else:
            out.append(complex(t[i, i], 0.0))
            i += 1
    return sort_spectrum(out)


def svd(m):
    """Full SVD ``m = U @ diag(sigma) @ V^H`` with a deterministic phase.

    Each column of U is rotated so that its largest-modulus entry (first
    one on ties) is real and positive; the matching column of V gets the
    same rotation so the product is unchanged. Columns of V beyond
    ``min(rows, cols)`` are normalised the same way on their own.

    Returns ``(U, sigma, V)`` where ``V`` (not ``V^H``) is returned.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    p, q = m.shape
    if p == 0 or q == 0:
        return np.eye(p, dtype=complex), np.zeros(0), np.eye(q, dtype=complex)
    try:
        u, sigma, vh = np.linalg.svd(m, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc
    v = vh.conj().T
    k = min(p, q)
    for j in range(p):
        idx = int(np.argmax(np.abs(u[:, j])))
        phase = u[idx, j] / abs(u[idx, j])
        u[:, j] *= np.conj(phase)
        if j < k:
            v[:, j] *= np.conj(phase)
    for j in range(k, q):
        idx = int(np.argmax(np.abs(v[:, j])))
        v[:, j] *= np.conj(v[idx, j] / abs(v[idx, j]))
    return u, sigma, v


def solve(a, b):
    """Solve ``a @ x = b``; raises SingularityError when cond(a) > 1e14."""
    a = _as_square(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"rhs has {b.shape[0]} rows, matrix is {a.shape[0]}x{a.shape[0]}")
    if a.shape[0] == 0:
        return b.copy()
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularityError(f"matrix is singular to working precision (cond={cond:.3g})")
    return np.linalg.solve(a, b)


def determinant(m):
    """Determinant via LU with partial pivoting. The 0x0 determinant is 1."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n == 0:
        return complex(1.0)
    if n == 1:
        return complex(m[0, 0])
    with warnings.catch_warnings():
        # an exactly singular input is a legitimate case here (det = 0)
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    swaps = np.count_nonzero(piv != np.arange(n))
    sign = -1.0 if swaps % 2 else 1.0
    return complex(sign * np.prod(np.diag(lu)))


def spectral_radius(m):
    ev = eigenvalues(m)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def sigma_max(m):
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def sigma_min(m):
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[-1])
