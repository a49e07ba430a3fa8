"""Continuous-time LTI systems in state-space form.

A :class:`StateSpace` holds real matrices ``(A, B, C, D)``. Stateless
systems (``n == 0``) are allowed and behave as a constant gain ``D``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import numeric_core as nc
from .errors import DimensionError, PoleError, WellPosednessError

POLE_DISTANCE = 1e-12
WELL_POSED_THRESHOLD = 1e-9

HURWITZ = "Hurwitz"
MARGINAL = "Marginal"
UNSTABLE = "Unstable"


def _real_matrix(x, rows=None, cols=None, name="matrix"):
    a = np.array(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim == 1 and rows is not None and cols is not None and a.size == rows * cols:
        a = a.reshape(rows, cols)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class StateSpace:
    """``x' = A x + B w``, ``r = C x + D w``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        d = _real_matrix(self.d, name="D")
        p, m = d.shape
        a = np.array(self.a, dtype=float)
        n = 0 if a.size == 0 else a.shape[0]
        a = _real_matrix(a, n, n, "A") if n else np.zeros((0, 0))
        b = np.array(self.b, dtype=float)
        b = _real_matrix(b, n, m, "B") if b.size else np.zeros((n, m))
        c = np.array(self.c, dtype=float)
        c = _real_matrix(c, p, n, "C") if c.size else np.zeros((p, n))
        if a.shape != (n, n) or b.shape != (n, m) or c.shape != (p, n):
            raise DimensionError(
                f"inconsistent dimensions: A{a.shape} B{b.shape} C{c.shape} D{d.shape}"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @classmethod
    def gain(cls, d):
        """Stateless system with transfer function identically ``d``."""
        d = _real_matrix(d, name="D")
        p, m = d.shape
        return cls(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), d)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def m(self):
        """Number of inputs."""
        return self.d.shape[1]

    @property
    def p(self):
        """Number of outputs."""
        return self.d.shape[0]

    @cached_property
    def poles(self):
        return nc.eigenvalues(self.a)

    def __call__(self, s):
        return evaluate(self, s)

    def __repr__(self):
        return f"StateSpace(n={self.n}, m={self.m}, p={self.p})"


@dataclass(frozen=True)
class StabilityClass:
    tag: str
    rightmost: complex

    @property
    def is_hurwitz(self):
        return self.tag == HURWITZ


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """Autonomous interconnection of a plant and an attack.

    ``combined`` has no inputs or outputs; its state is ``[x; x_attack]``.
    ``certificate`` is ``det(I - Dt D)``.
    """

    combined: StateSpace
    well_posed: bool
    certificate: complex


def evaluate(g: StateSpace, s: complex) -> np.ndarray:
    """Transfer matrix ``C (sI - A)^{-1} B + D`` at the complex point ``s``."""
    s = complex(s)
    if g.n == 0:
        return g.d.astype(complex)
    poles = g.poles
    dist = np.abs(poles - s)
    k = int(np.argmin(dist))
    if dist[k] <= POLE_DISTANCE:
        raise PoleError(s, complex(poles[k]))
    x = nc.solve(s * np.eye(g.n) - g.a, g.b)
    return g.c @ x + g.d


def frequency_response(g: StateSpace, omegas) -> np.ndarray:
    """``G(j w)`` for every ``w`` in ``omegas``; shape ``(len(omegas), p, m)``."""
    omegas = np.asarray(omegas, dtype=float)
    if g.n == 0:
        return np.broadcast_to(g.d.astype(complex), (omegas.size, g.p, g.m)).copy()
    s = 1j * omegas
    dist = np.abs(s[:, None] - g.poles[None, :])
    if dist.size and dist.min() <= POLE_DISTANCE:
        i, k = np.unravel_index(np.argmin(dist), dist.shape)
        raise PoleError(complex(s[i]), complex(g.poles[k]))
    lhs = s[:, None, None] * np.eye(g.n) - g.a
    rhs = np.broadcast_to(g.b.astype(complex), (omegas.size, g.n, g.m))
    return g.c @ np.linalg.solve(lhs, rhs) + g.d


def interconnect(g: StateSpace, delta: StateSpace) -> ClosedLoop:
    """Close the loop ``w = Delta r`` around ``g``.

    The direct-feedthrough loop is resolved with ``Q = (I - Dt D)^{-1}``:
    ``w = Q (Dt C x + Ct xt)``. With ``D = 0`` this reduces to the block
    matrix ``[[A + B Dt C, B Ct], [Bt C, At]]``.
    """
    if g.p != delta.m or g.m != delta.p:
        raise DimensionError(
            f"plant is {g.p}x{g.m} (outputs x inputs) but attack is {delta.p}x{delta.m}"
        )
    m = g.m
    cert = nc.determinant(np.eye(m) - delta.d @ g.d)
    if abs(cert) <= WELL_POSED_THRESHOLD:
        raise WellPosednessError(f"det(I - Dt D) = {cert:.3g}; the feedback loop is ill-posed")
    q = np.linalg.solve(np.eye(m) - delta.d @ g.d, np.eye(m)) if m else np.zeros((0, 0))

    a, b, c, d = g.a, g.b, g.c, g.d
    at, bt, ct, dt = delta.a, delta.b, delta.c, delta.d
    top_left = a + b @ q @ dt @ c
    top_right = b @ q @ ct
    bottom_left = bt @ (c + d @ q @ dt @ c)
    bottom_right = at + bt @ d @ q @ ct
    combined_a = np.block([[top_left, top_right], [bottom_left, bottom_right]])
    n = combined_a.shape[0]
    combined = StateSpace(combined_a, np.zeros((n, 0)), np.zeros((0, n)), np.zeros((0, 0)))
    return ClosedLoop(combined, True, cert)


def classify(sys: StateSpace) -> StabilityClass:
    """Hurwitz / Marginal / Unstable from the rightmost eigenvalue of ``A``.

    The imaginary axis is widened to a band of half-width
    ``1e-6 * (1 + |rightmost|)``.
    """
    if sys.n == 0:
        return StabilityClass(HURWITZ, complex(-np.inf, 0.0))
    rightmost = complex(sys.poles[0])
    axis_tol = 1e-6 * (1.0 + abs(rightmost))
    if rightmost.real < -axis_tol:
        tag = HURWITZ
    elif rightmost.real > axis_tol:
        tag = UNSTABLE
    else:
        tag = MARGINAL
    return StabilityClass(tag, rightmost)


def char_poly(a, s):
    """``det(sI - a)``; 1 for an empty matrix."""
    a = np.asarray(a, dtype=float)
    return nc.determinant(s * np.eye(a.shape[0]) - a)


def char_poly_identity_residual(g: StateSpace, delta: StateSpace, s: complex) -> float:
    """Normalised mismatch between ``det(sI - A_cl)`` and ``p_A p_At det(I - Delta G)``.

    For plants with feedthrough the right-hand side is divided by the
    well-posedness certificate ``det(I - Dt D)``; with ``D = 0`` that
    factor is 1.
    """
    loop = interconnect(g, delta)
    lhs = char_poly(loop.combined.a, s)
    gs = evaluate(g, s)
    ds = evaluate(delta, s)
    rhs = (
        char_poly(g.a, s)
        * char_poly(delta.a, s)
        * nc.determinant(np.eye(g.m) - ds @ gs)
        / loop.certificate
    )
    return abs(lhs - rhs) / (1.0 + abs(lhs))


def series(head: StateSpace, tail: StateSpace) -> StateSpace:
    """Cascade: the output of ``head`` drives ``tail``. Transfer is ``tail(s) @ head(s)``."""
    if head.p != tail.m:
        raise DimensionError(f"head has {head.p} outputs but tail has {tail.m} inputs")
    nh, nt = head.n, tail.n
    a = np.block([[head.a, np.zeros((nh, nt))], [tail.b @ head.c, tail.a]])
    b = np.vstack([head.b, tail.b @ head.d])
    c = np.hstack([tail.d @ head.c, tail.c])
    d = tail.d @ head.d
    return StateSpace(a, b, c, d)


def scale_output(g: StateSpace, k: float) -> StateSpace:
    return StateSpace(g.a, g.b, k * g.c, k * g.d)


def kron_eye(g: StateSpace, k: int) -> StateSpace:
    """``k`` decoupled copies of a SISO system, i.e. ``g(s) * I_k``."""
    if g.m != 1 or g.p != 1:
        raise DimensionError("kron_eye expects a SISO system")
    eye = np.eye(k)
    return StateSpace(np.kron(eye, g.a), np.kron(eye, g.b), np.kron(eye, g.c), np.kron(eye, g.d))


def similarity(g: StateSpace, t) -> StateSpace:
    """Change of state coordinates ``x -> T x``."""
    t = np.asarray(t, dtype=float)
    ti = np.linalg.inv(t)
    return StateSpace(t @ g.a @ ti, t @ g.b, g.c @ ti, g.d)
