"""Numerical certificates for minimal destabilizing attacks.

``certify`` recomputes every norm itself and trusts nothing the
synthesizer claims. ``small_gain_sweep`` checks that shrinking a minimal
attack by ``tau < 1`` leaves the loop Hurwitz. ``trace_branch`` follows the
eigenvalue sitting at ``j w0`` as the attack grows by ``1 + eps``; its speed
should be ``-1/lambda'(0)``, where ``lambda(s)`` is the eigenvalue of
``Delta(s) G(s)`` passing through 1.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import hinf, lti
from . import numeric_core as nc
from .errors import NumericError, PreconditionError, WellPosednessError
from .synth import AttackSystem, scale_attack

PASS_TOL = 1e-6
AMBIGUITY_TOL = 1e-9


@dataclass(frozen=True)
class AttackCertificate:
    destabilization_residual: float
    minimality_residual: float
    closed_loop_class: lti.StabilityClass | None
    well_posed: bool
    omega0: float = math.nan
    plant_norm: float = math.nan
    attack_norm: float = math.nan

    @property
    def passed(self):
        return (
            self.destabilization_residual < PASS_TOL
            and self.minimality_residual < PASS_TOL
            and self.well_posed
            and self.closed_loop_class is not None
            and self.closed_loop_class.tag == lti.MARGINAL
        )


@dataclass(frozen=True)
class EigenBranch:
    """Closed-loop eigenvalue ``z(eps)`` tracked from ``j w0`` as the attack is scaled."""

    samples: list
    crossing_rate: float
    zdot: complex
    truncated: bool = False
    note: str = ""

    @property
    def eps(self):
        return np.array([e for e, _ in self.samples])

    @property
    def values(self):
        return np.array([z for _, z in self.samples])


@dataclass(frozen=True)
class BranchDerivative:
    lambda_prime: complex
    zdot: complex
    residual: float
    skipped: bool = False
    diagnostic: str = ""


def passes(cert: AttackCertificate, near_minimal_eps=None) -> bool:
    """PASS rule; a near-minimal attack may overshoot ``||Delta|| ||G|| = 1`` by up to ``eps``."""
    if near_minimal_eps is None:
        return cert.passed
    gap = cert.attack_norm * cert.plant_norm - 1.0
    return (
        cert.destabilization_residual < PASS_TOL
        and -PASS_TOL < gap <= near_minimal_eps + PASS_TOL
        and cert.well_posed
        and cert.closed_loop_class is not None
        and cert.closed_loop_class.tag == lti.MARGINAL
    )


def _omega0_for(g, att):
    if att.target_omega0 is not None and math.isfinite(att.target_omega0):
        return float(att.target_omega0)
    return hinf.hinf_norm(g).omega0


def loop_matrix(g, att, omega):
    """``M = Delta(j w) G(j w)``; at ``w = inf`` this is ``Dt D``."""
    if math.isinf(omega):
        return att.realization.d @ g.d
    s = 1j * omega
    return lti.evaluate(att.realization, s) @ lti.evaluate(g, s)


def certify(g: lti.StateSpace, att: AttackSystem) -> AttackCertificate:
    """Check destabilization, minimality, well-posedness and the closed-loop class."""
    delta = att.realization
    if not lti.classify(g).is_hurwitz:
        raise PreconditionError("certification needs a Hurwitz plant")
    if delta.n and not np.all(delta.poles.real < 0.0):
        raise PreconditionError("the attack itself must be stable")
    omega0 = _omega0_for(g, att)
    m = loop_matrix(g, att, omega0)
    destab = nc.sigma_min(np.eye(g.m) - m)
    g_norm = hinf.hinf_norm(g).peak
    d_norm = hinf.hinf_norm(delta).peak if np.any(delta.d) or delta.n else 0.0
    minimal = abs(d_norm * g_norm - 1.0)
    try:
        loop = lti.interconnect(g, delta)
    except WellPosednessError:
        return AttackCertificate(destab, minimal, None, False, omega0, g_norm, d_norm)
    cls = lti.classify(loop.combined)
    return AttackCertificate(destab, minimal, cls, True, omega0, g_norm, d_norm)


def small_gain_sweep(g, att, taus):
    """Closed-loop class of ``g`` against ``tau * Delta`` for each ``tau``."""
    out = []
    for tau in taus:
        scaled = scale_attack(att, float(tau) - 1.0) if tau > 0 else None
        if scaled is None:
            delta = lti.scale_output(att.realization, 0.0)
        else:
            delta = scaled.realization
        out.append(lti.classify(lti.interconnect(g, delta).combined))
    return out


def _thread_count():
    try:
        return max(1, int(os.environ.get("DESTAB_THREADS", "1")))
    except ValueError:
        return 1


def _closed_loop_spectrum(g, att, eps):
    return lti.interconnect(g, scale_attack(att, eps).realization).combined.poles


def _continue(start, spectra):
    """Nearest-neighbour continuation; returns (values, truncated_at_index or None)."""
    values = []
    prev = start
    for k, ev in enumerate(spectra):
        dist = np.abs(ev - prev)
        order = np.argsort(dist)
        if len(order) > 1 and dist[order[1]] - dist[order[0]] <= AMBIGUITY_TOL:
            # a conjugate partner sitting on the real axis is the same eigenvalue
            if abs(ev[order[1]] - ev[order[0]]) > AMBIGUITY_TOL:
                return values, k
        prev = complex(ev[order[0]])
        values.append(prev)
    return values, None


def trace_branch(g, att, eps_max=0.2, steps=41) -> EigenBranch:
    """Track the closed-loop eigenvalue starting at ``j w0`` over ``eps in [-eps_max, eps_max]``.

    ``steps`` should be odd so that ``eps = 0`` is on the grid. The
    spectra are computed independently (optionally on ``DESTAB_THREADS``
    threads); the matching is a sequential walk outward from ``eps = 0``.
    """
    if steps < 3:
        raise ValueError("need at least 3 samples")
    if steps % 2 == 0:
        steps += 1
    mid = steps // 2
    grid = eps_max * (np.arange(steps) - mid) / mid
    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(lambda e: _closed_loop_spectrum(g, att, e), grid))
    else:
        spectra = [_closed_loop_spectrum(g, att, e) for e in grid]

    omega0 = _omega0_for(g, att)
    right, cut_r = _continue(1j * omega0, spectra[mid:])
    left, cut_l = _continue(1j * omega0, spectra[mid::-1])
    truncated = cut_r is not None or cut_l is not None
    lo = mid - (len(left) - 1)
    samples = [(float(grid[lo + i]), z) for i, z in enumerate(reversed(left))]
    samples += [(float(grid[mid + i]), z) for i, z in enumerate(right) if i > 0]

    if len(left) > 1 and len(right) > 1:
        h = grid[mid + 1] - grid[mid]
        zdot = (right[1] - left[1]) / (2.0 * h)
    else:
        zdot = complex(math.nan, math.nan)
    note = "continuation ambiguous; branch truncated" if truncated else ""
    return EigenBranch(samples, float(zdot.real), complex(zdot), truncated, note)


def branch_destabilizes(branch: EigenBranch):
    """True when every sampled ``eps > 0`` has ``Re z(eps) > 0``."""
    pos = [z for e, z in branch.samples if e > 0]
    return bool(pos) and all(z.real > 0 for z in pos)


def _eigen_near_one(m):
    ev = np.linalg.eigvals(m)
    k = int(np.argmin(np.abs(ev - 1.0)))
    return complex(ev[k]), ev


def branch_derivative_check(g, att, h=1e-6) -> BranchDerivative:
    """``lambda'(0)`` of the eigenvalue of ``Delta(s) G(s)`` through 1 at ``s = j w0``.

    The derivative is a central difference along the real direction with
    one Richardson step; ``lambda`` is holomorphic there so the real
    direction suffices. It is compared with ``zdot`` taken from a short
    branch trace through ``-1/lambda'(0) = zdot(0)``.
    """
    omega0 = _omega0_for(g, att)
    s0 = 1j * omega0
    m0 = loop_matrix(g, att, omega0)
    _, ev = _eigen_near_one(m0)
    near = np.sum(np.abs(ev - 1.0) < 1e-6)
    if near != 1:
        return BranchDerivative(
            complex(math.nan), complex(math.nan), math.nan, True,
            f"eigenvalue 1 of M(j w0) has multiplicity {near}; a single branch is not isolable",
        )

    def lam(s):
        mm = lti.evaluate(att.realization, s) @ lti.evaluate(g, s)
        return _eigen_near_one(mm)[0]

    def central(step):
        return (lam(s0 + step) - lam(s0 - step)) / (2.0 * step)

    d1, d2 = central(h), central(h / 2.0)
    lambda_prime = (4.0 * d2 - d1) / 3.0
    if abs(lambda_prime) < 1e-12:
        raise NumericError(
            "lambda'(0) vanishes: det(I - Delta G) looks identically zero, which an "
            "ill-posed interconnection would cause"
        )
    zdot = -1.0 / lambda_prime

    branch = trace_branch(g, att, eps_max=1e-4, steps=5)
    traced = _richardson_zdot(branch)
    residual = abs(traced - zdot) / abs(traced)
    return BranchDerivative(complex(lambda_prime), complex(zdot), float(residual))


def _richardson_zdot(branch):
    eps = branch.eps
    z = branch.values
    mid = len(eps) // 2
    h = eps[mid + 1] - eps[mid]
    d1 = (z[mid + 2] - z[mid - 2]) / (4.0 * h)
    d2 = (z[mid + 1] - z[mid - 1]) / (2.0 * h)
    return complex((4.0 * d2 - d1) / 3.0)
