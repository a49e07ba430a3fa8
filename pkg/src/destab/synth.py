"""Construction of minimal destabilizing feedback attacks.

Every attack is a stable, real-coefficient LTI system ``Delta`` with
``det(I - Delta(j w0) G(j w0)) = 0`` and ``||Delta||_inf = 1/||G||_inf``.
SISO plants get a scalar all-pass interpolant of ``1/G(j w0)``; MIMO
plants get the rank-one dyad ``a(s) b(s)^T / sigma_1`` whose entries
interpolate the top singular vectors at ``j w0``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import hinf, lti
from . import numeric_core as nc
from .errors import DimensionError, PreconditionError, UnrepresentableError

CONSTANT = "constant"
FIRST_ORDER = "first_order"

REAL_TOL = 1e-12
# singular-vector entries smaller than this (relative to the largest) are zero
ZERO_ENTRY_TOL = 1e-14


@dataclass(frozen=True)
class AllPassFactor:
    """``r(s) = gain`` (constant) or ``r(s) = gain * (s - alpha)/(s + alpha)``.

    For the first-order kind ``gain = sigma * |z|``.
    """

    kind: str
    gain: float
    sigma: int = 1
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind == FIRST_ORDER and not self.alpha > 0.0:
            raise ValueError(f"first-order all-pass needs alpha > 0, got {self.alpha}")

    def __call__(self, s):
        s = complex(s)
        if self.kind == CONSTANT:
            return complex(self.gain)
        return self.gain * (s - self.alpha) / (s + self.alpha)


@dataclass(frozen=True)
class AttackForm:
    """Symbolic description of an attack.

    ``kind`` is ``"scalar"`` (one factor in ``a``) or ``"dyad"``
    (``Delta = scale * a(s) b(s)^T``). ``filter_omega`` is set when the
    strictly proper well-posedness filter multiplies the whole thing.
    ``scaling`` is the ``(1 + eps)`` factor applied afterwards.
    """

    kind: str
    a: tuple = ()
    b: tuple = ()
    scale: float = 1.0
    filter_omega: float | None = None
    scaling: float = 1.0


@dataclass(frozen=True, eq=False)
class AttackSystem:
    realization: lti.StateSpace
    form: AttackForm
    target_omega0: float
    claimed_norm: float
    construction: str = "siso"
    epsilon: float = 0.0
    near_minimal_eps: float | None = None


def allpass_interpolant(z: complex, omega0: float) -> AllPassFactor:
    """Stable real-coefficient ``r`` with ``r(j w0) = z`` and ``|r(jw)| = |z|``.

    Real ``z`` gives the constant ``r = z``. Otherwise
    ``r(s) = sigma |z| (s - alpha)/(s + alpha)`` with
    ``sigma = sgn(w0 Im z)`` and ``alpha = |w0 Im z| / (|z| + sigma Re z)``.
    """
    z = complex(z)
    mag = abs(z)
    if abs(z.imag) <= REAL_TOL * mag or mag == 0.0:
        return AllPassFactor(CONSTANT, z.real)
    if omega0 == 0.0:
        raise UnrepresentableError(
            f"a real-coefficient function is real at s = 0; cannot interpolate z = {z}"
        )
    sigma = 1 if omega0 * z.imag > 0 else -1
    denom = mag + sigma * z.real
    if denom < REAL_TOL * mag:
        # only reachable through rounding: z is (anti)real to working precision
        return AllPassFactor(CONSTANT, math.copysign(mag, z.real))
    alpha = abs(omega0 * z.imag) / denom
    return AllPassFactor(FIRST_ORDER, sigma * mag, sigma, alpha)


def realize_allpass(f: AllPassFactor) -> lti.StateSpace:
    """``(-alpha, 2 alpha, -gain, gain)``, or a stateless gain for constants."""
    if f.kind == CONSTANT:
        return lti.StateSpace.gain([[f.gain]])
    return lti.StateSpace([[-f.alpha]], [[2.0 * f.alpha]], [[-f.gain]], [[f.gain]])


def _row_allpass(factors):
    """Single-output system ``e = sum_j f_j(s) r_j`` (one state per first-order factor)."""
    k = len(factors)
    dyn = [j for j, f in enumerate(factors) if f.kind == FIRST_ORDER]
    n = len(dyn)
    a = np.zeros((n, n))
    b = np.zeros((n, k))
    c = np.zeros((1, n))
    d = np.array([[f.gain for f in factors]], dtype=float)
    for i, j in enumerate(dyn):
        f = factors[j]
        a[i, i] = -f.alpha
        b[i, j] = 2.0 * f.alpha
        c[0, i] = -f.gain
    return lti.StateSpace(a, b, c, d)


def _column_allpass(factors):
    """Single-input system with outputs ``y_i = f_i(s) e``."""
    k = len(factors)
    dyn = [i for i, f in enumerate(factors) if f.kind == FIRST_ORDER]
    n = len(dyn)
    a = np.zeros((n, n))
    b = np.zeros((n, 1))
    c = np.zeros((k, n))
    d = np.array([[f.gain] for f in factors], dtype=float).reshape(k, 1)
    for st, i in enumerate(dyn):
        f = factors[i]
        a[st, st] = -f.alpha
        b[st, 0] = 2.0 * f.alpha
        c[i, st] = -f.gain
    return lti.StateSpace(a, b, c, d)


def realize_form(form: AttackForm) -> lti.StateSpace:
    """State-space realization of a symbolic attack."""
    if form.kind == "scalar":
        sys = lti.scale_output(realize_allpass(form.a[0]), form.scale)
    else:
        sys = lti.series(_row_allpass(form.b), _column_allpass(form.a))
        sys = lti.scale_output(sys, form.scale)
    if form.filter_omega is not None:
        sys = _filtered(sys, form.filter_omega)
    if form.scaling != 1.0:
        sys = lti.scale_output(sys, form.scaling)
    return sys


def _check_critical(cp):
    if cp.at_infinity:
        raise PreconditionError(
            "the H-infinity norm is only approached as w -> inf; use synth_near_minimal"
        )


def synth_siso(g: lti.StateSpace, cp: hinf.CriticalPoint) -> AttackSystem:
    """Scalar attack ``Delta = r(s)`` interpolating ``1/G(j w0)``."""
    if g.m != 1 or g.p != 1:
        raise DimensionError(f"synth_siso needs a SISO plant, got {g.p}x{g.m}")
    _check_critical(cp)
    g0 = complex(lti.evaluate(g, 1j * cp.omega0)[0, 0])
    z = 1.0 / g0
    if cp.omega0 == 0.0:
        z = complex(z.real, 0.0)
    factor = allpass_interpolant(z, cp.omega0)
    form = AttackForm("scalar", a=(factor,))
    return AttackSystem(
        realization=realize_form(form),
        form=form,
        target_omega0=cp.omega0,
        claimed_norm=1.0 / abs(g0),
        construction="siso",
    )


def _interpolants(vec, omega0):
    vec = np.asarray(vec, dtype=complex)
    big = float(np.max(np.abs(vec))) if vec.size else 0.0
    out = []
    for z in vec:
        if abs(z) <= ZERO_ENTRY_TOL * big:
            z = 0.0
        elif omega0 == 0.0:
            # G(0) is real, so its singular vectors are real up to rounding
            z = complex(z).real
        out.append(allpass_interpolant(z, omega0))
    return tuple(out)


def synth_mimo(g: lti.StateSpace, cp: hinf.CriticalPoint) -> AttackSystem:
    """Dyadic attack ``Delta(s) = a(s) b(s)^T / sigma_1``.

    ``a_i`` interpolates ``v_i`` and ``b_i`` interpolates ``conj(u_i)`` at
    ``j w0``, where ``(u, v)`` is the top singular pair of ``G(j w0)``. The
    singular pair is recomputed here so that ``sigma_1`` matches
    ``G(j w0)`` exactly.
    """
    _check_critical(cp)
    u_mat, sig, v_mat = nc.svd(lti.evaluate(g, 1j * cp.omega0))
    sigma1 = float(sig[0])
    u, v = u_mat[:, 0], v_mat[:, 0]
    form = AttackForm(
        "dyad",
        a=_interpolants(v, cp.omega0),
        b=_interpolants(np.conj(u), cp.omega0),
        scale=1.0 / sigma1,
    )
    return AttackSystem(
        realization=realize_form(form),
        form=form,
        target_omega0=cp.omega0,
        claimed_norm=1.0 / sigma1,
        construction="mimo",
    )


def wellposedness_filter(omega0: float) -> lti.StateSpace:
    """Strictly proper ``r`` with ``r(j w0) = 1`` and ``|r(jw)| <= 1``.

    ``2|w0| s / (s + |w0|)^2`` for ``w0 != 0``, else ``1/(s + 1)``.
    """
    w = abs(omega0)
    if w == 0.0:
        return lti.StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    # controllable canonical form of 2 w s / (s^2 + 2 w s + w^2)
    return lti.StateSpace([[0.0, 1.0], [-w * w, -2.0 * w]], [[0.0], [1.0]], [[0.0, 2.0 * w]], [[0.0]])


def _filtered(sys, omega0):
    r = wellposedness_filter(omega0)
    if sys.m <= sys.p:
        return lti.series(lti.kron_eye(r, sys.m), sys)
    return lti.series(sys, lti.kron_eye(r, sys.p))


def apply_wellposedness_filter(att: AttackSystem, omega0: float) -> AttackSystem:
    """Multiply the attack by the scalar filter; keeps ``Delta(j w0)`` and kills ``Dt``."""
    form = replace(att.form, filter_omega=float(omega0))
    return replace(att, realization=realize_form(form), form=form)


def synth_near_minimal(g: lti.StateSpace, eps: float) -> AttackSystem:
    """Attack within a factor ``(1 + eps)`` of minimal when the peak sits at infinity.

    Walks an ascending frequency grid to the first ``w0`` with
    ``(1 + eps) |G(j w0)| >= ||G||_inf`` and builds the dyad there. The
    well-posedness filter is always applied, so ``Dt = 0``.
    """
    if not eps > 0.0:
        raise PreconditionError(f"eps must be positive, got {eps}")
    cp = hinf.hinf_norm(g)
    if not cp.at_infinity:
        return synthesize(g, cp=cp)
    target = cp.peak / (1.0 + eps)
    rho = max(1.0, nc.spectral_radius(g.a))
    omega0 = None
    for decade in range(-4, 16):
        for w in rho * 10.0 ** (decade + np.arange(0, 1, 0.05)):
            if hinf.gain_at(g, w) >= target:
                omega0 = float(w)
                break
        if omega0 is not None:
            break
    if omega0 is None:
        raise PreconditionError("no finite frequency reaches the near-minimal target gain")
    gain = hinf.gain_at(g, omega0)
    u, sig, v = nc.svd(lti.evaluate(g, 1j * omega0))
    local = hinf.CriticalPoint(omega0, float(sig[0]), u[:, 0], v[:, 0], False)
    att = synth_mimo(g, local)
    att = apply_wellposedness_filter(att, omega0)
    return replace(att, claimed_norm=1.0 / gain, construction="near_minimal", near_minimal_eps=eps)


def scale_attack(att: AttackSystem, eps: float) -> AttackSystem:
    """``(1 + eps) * Delta``; ``C`` and ``D`` of the realization are scaled."""
    if not eps > -1.0:
        raise PreconditionError(f"eps must exceed -1, got {eps}")
    k = 1.0 + eps
    form = replace(att.form, scaling=att.form.scaling * k)
    return replace(
        att,
        realization=lti.scale_output(att.realization, k),
        form=form,
        claimed_norm=att.claimed_norm * k,
        epsilon=(1.0 + att.epsilon) * k - 1.0,
    )


def synthesize(g: lti.StateSpace, near_minimal_eps=None, cp=None) -> AttackSystem:
    """Pick the right construction for ``g``.

    SISO plants use the scalar interpolant, others the dyad. A plant with
    feedthrough gets the well-posedness filter. When the peak is only
    approached at infinity ``near_minimal_eps`` is required.
    """
    if cp is None:
        cp = hinf.hinf_norm(g)
    if cp.at_infinity:
        if near_minimal_eps is None:
            raise PreconditionError(
                "the H-infinity norm of this plant is attained only at infinite frequency; "
                "no exactly minimal attack exists. Pass a near-minimal tolerance "
                "(--eps-near-minimal) to build one within (1 + eps) of minimal."
            )
        return synth_near_minimal(g, near_minimal_eps)
    if g.m == 1 and g.p == 1:
        att = synth_siso(g, cp)
    else:
        att = synth_mimo(g, cp)
    if np.any(g.d):
        att = apply_wellposedness_filter(att, cp.omega0)
    return att
