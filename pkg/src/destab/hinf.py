"""H-infinity norm of a stable LTI system and a frequency attaining it.

Two phases. A coarse frequency grid brackets the peak gain. Then we
bisect on the level ``gamma``: ``gamma`` exceeds every singular value of
``G(jw)`` iff the Hamiltonian ``H(gamma)`` has no eigenvalue on the
imaginary axis. Whenever it does have some, those crossing frequencies
cut the axis into intervals and the gain at the interval midpoints lifts
the lower bound (the level-set step of Boyd/Balakrishnan and
Bruinsma/Steinbuch). The lower bound is always a gain that was actually
evaluated, so it can never overshoot the true norm.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import lti
from . import numeric_core as nc
from .errors import NumericError, PreconditionError

GRID_POINTS = 256
MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    """Peak gain ``peak`` reached at ``omega0`` with singular pair ``(u, v)``.

    ``G(j omega0) v = peak * u``. When ``at_infinity`` is set the supremum
    is only approached as ``w -> inf``; ``omega0`` is then ``inf`` and the
    singular vectors come from ``D``.
    """

    omega0: float
    peak: float
    u: np.ndarray
    v: np.ndarray
    at_infinity: bool = False


def gain_at(g: lti.StateSpace, omega: float) -> float:
    """Largest singular value of ``G(j omega)``."""
    return nc.sigma_max(lti.evaluate(g, 1j * omega))


def hamiltonian(g: lti.StateSpace, gamma: float) -> np.ndarray:
    """Hamiltonian whose imaginary eigenvalues ``jw`` mark ``gamma`` as a singular value of ``G(jw)``.

    Requires ``gamma > sigma_max(D)``.
    """
    a, b, c, d = g.a, g.b, g.c, g.d
    r = d.T @ d - gamma**2 * np.eye(g.m)
    s = d @ d.T - gamma**2 * np.eye(g.p)
    r_inv = np.linalg.inv(r)
    s_inv = np.linalg.inv(s)
    a_eff = a - b @ r_inv @ d.T @ c
    return np.block(
        [
            [a_eff, -gamma * b @ r_inv @ b.T],
            [gamma * c.T @ s_inv @ c, -a_eff.T],
        ]
    )


def _axis_crossings(g, gamma):
    """Nonnegative frequencies where ``H(gamma)`` has imaginary-axis eigenvalues."""
    h = hamiltonian(g, gamma)
    ev = np.linalg.eigvals(h)
    scale = max(1.0, float(np.linalg.norm(h, 1)))
    on_axis = ev[np.abs(ev.real) <= 1e-8 * scale]
    freqs = np.sort(np.abs(on_axis.imag))
    if freqs.size == 0:
        return freqs
    # merge the +/- copies and near-duplicates
    keep = [freqs[0]]
    for f in freqs[1:]:
        if f - keep[-1] > 1e-12 * max(1.0, f):
            keep.append(f)
    return np.array(keep)


def _probe_points(crossings):
    """Crossing frequencies, the origin, and the midpoints between them."""
    pts = np.concatenate(([0.0], crossings))
    mids = 0.5 * (pts[:-1] + pts[1:])
    return np.concatenate((pts, mids))


def _frequency_grid(g):
    rho = max(1.0, nc.spectral_radius(g.a))
    grid = np.logspace(-4, 4, GRID_POINTS) * rho
    pole_freqs = np.abs(g.poles.imag)
    return np.unique(np.concatenate(([0.0], grid, pole_freqs)))


def gain_slope(g: lti.StateSpace, omega: float) -> float:
    """``d/dw sigma_max(G(jw))`` for a simple top singular value.

    ``dG/dw = -j C (jwI - A)^{-2} B`` and ``d sigma = Re(u^H dG v)``.
    Unlike the gain itself this has a clean sign change at a peak, so
    its root pins the peak frequency to near machine precision.
    """
    s = 1j * omega
    x = nc.solve(s * np.eye(g.n) - g.a, g.b)
    gval = g.c @ x + g.d
    dg = -1j * g.c @ nc.solve(s * np.eye(g.n) - g.a, x)
    u, _, v = nc.svd(gval)
    return float(np.real(u[:, 0].conj() @ dg @ v[:, 0]))


def _refine_root(g, w):
    """Sharpen a peak location with a bracketed root of :func:`gain_slope`."""
    if w <= 0.0 or g.n == 0:
        return w
    scale = max(1.0, w)
    for rel in (1e-7, 1e-6, 1e-5, 1e-4):
        lo, hi = w - rel * scale, w + rel * scale
        if lo <= 0.0:
            lo = 0.5 * w
        try:
            f_lo, f_hi = gain_slope(g, lo), gain_slope(g, hi)
        except (ArithmeticError, ValueError):
            return w
        if f_lo > 0.0 > f_hi:
            return float(scipy.optimize.brentq(lambda t: gain_slope(g, t), lo, hi, xtol=1e-15 * scale, rtol=1e-15))
    return w


def _polish(g, lo, hi, tol):
    """Maximise the gain on ``[lo, hi]``; returns ``(omega, gain)``."""
    if hi <= lo:
        return lo, gain_at(g, lo)
    res = scipy.optimize.minimize_scalar(
        lambda w: -gain_at(g, w),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": tol * max(1.0, hi)},
    )
    w = float(res.x)
    refined = _refine_root(g, w)
    if lo <= refined <= hi:
        w = refined
    return w, gain_at(g, w)


def hinf_norm(g: lti.StateSpace, rel_tol: float = 1e-8) -> CriticalPoint:
    """``||G||_inf`` to relative accuracy ``rel_tol`` and a critical frequency.

    Among frequencies whose gain is within ``rel_tol`` of the peak the
    smallest nonnegative one is reported.

    Raises:
        PreconditionError: ``g`` is not Hurwitz, or ``G`` is identically zero.
    """
    stab = lti.classify(g)
    if not stab.is_hurwitz:
        raise PreconditionError(f"H-infinity norm needs a Hurwitz system; got {stab.tag}")
    sigma_d = nc.sigma_max(g.d)

    if g.n == 0 or not np.any(g.b) or not np.any(g.c):
        if sigma_d == 0.0:
            raise PreconditionError("transfer function is identically zero")
        u, sig, v = nc.svd(g.d)
        return CriticalPoint(0.0, float(sig[0]), u[:, 0], v[:, 0], False)

    grid = _frequency_grid(g)
    gains = np.linalg.svd(lti.frequency_response(g, grid), compute_uv=False)[:, 0]
    k = int(np.argmax(gains))
    lb, w_best = float(gains[k]), float(grid[k])
    if lb == 0.0 and sigma_d == 0.0:
        raise PreconditionError("transfer function is identically zero")

    def level_step(gamma):
        """Returns the best ``(gain, omega)`` found at level ``gamma`` or None."""
        if gamma <= sigma_d:
            return None
        crossings = _axis_crossings(g, gamma)
        if crossings.size == 0:
            return None
        probes = _probe_points(crossings)
        vals = np.array([gain_at(g, w) for w in probes])
        j = int(np.argmax(vals))
        if vals[j] < gamma * (1.0 - 1e-9):
            # eigenvalues only looked imaginary; no frequency reaches gamma
            return None
        return float(vals[j]), float(probes[j])

    ub = None
    gamma = 2.0 * max(lb, sigma_d)
    for _ in range(MAX_ITER):
        found = level_step(gamma)
        if found is None:
            ub = gamma
            break
        if found[0] > lb:
            lb, w_best = found
        gamma = 2.0 * max(lb, gamma)
    if ub is None:
        raise NumericError("could not find an upper bound for the H-infinity norm")

    for _ in range(MAX_ITER):
        lo = max(lb, sigma_d)
        if ub - lo <= rel_tol * lo:
            break
        gamma = 0.5 * (lo + ub)
        found = level_step(gamma)
        if found is None:
            ub = gamma
        elif found[0] > lb:
            lb, w_best = found
        else:
            # gamma reached only to within eigenvalue noise: nothing left to resolve
            break
    else:
        raise NumericError("H-infinity bisection did not converge")

    if lb <= (1.0 + rel_tol) * sigma_d:
        # No finite frequency beats the feedthrough by more than rel_tol. Gains
        # creeping up on sigma_max(D) as w grows do not count as finite peaks;
        # only local maxima of the gain curve do.
        local_best, w_local = _best_local_max(grid, gains)
        if sigma_d > (1.0 + rel_tol) * local_best:
            u, sig, v = nc.svd(g.d)
            return CriticalPoint(math.inf, float(sig[0]), u[:, 0], v[:, 0], True)
        lb, w_best = local_best, w_local

    omega0, peak = _locate_peak(g, w_best, rel_tol)
    u, sig, v = nc.svd(lti.evaluate(g, 1j * omega0))
    return CriticalPoint(float(omega0), float(peak), u[:, 0], v[:, 0], False)


def _best_local_max(grid, gains):
    """Largest grid gain that is a local maximum; the last grid point never counts."""
    best, w_best = 0.0, 0.0
    for i in range(len(grid) - 1):
        left = gains[i - 1] if i > 0 else gains[i + 1]  # gain is even in w
        if gains[i] >= left and gains[i] >= gains[i + 1] and gains[i] > best:
            best, w_best = float(gains[i]), float(grid[i])
    return best, w_best


def _locate_peak(g, w_best, rel_tol):
    """Refine the peak frequency and apply the smallest-frequency tie break.

    Each interval where the gain exceeds a level just below the peak holds
    a local maximum, which is polished. Distinct local maxima within
    ``rel_tol`` of the peak tie; the smallest frequency wins.
    """
    best_gain = gain_at(g, w_best)
    gain0 = gain_at(g, 0.0)
    level = best_gain * (1.0 - 10.0 * rel_tol)
    crossings = _axis_crossings(g, level) if level > nc.sigma_max(g.d) else np.zeros(0)
    intervals = []
    if crossings.size:
        edges = np.concatenate(([0.0], crossings))
        for lo, hi in zip(edges[:-1], edges[1:]):
            if gain_at(g, 0.5 * (lo + hi)) >= level:
                intervals.append((lo, hi))
    if not intervals:
        half = 1e-3 * max(w_best, 1.0)
        intervals.append((max(0.0, w_best - half), w_best + half))

    peaks = []
    for lo, hi in intervals:
        w, gv = _polish(g, lo, hi, 1e-12)
        # the gain is even in w, so w = 0 is always a stationary point
        if lo == 0.0 and gain0 >= gv * (1.0 - 1e-12):
            w, gv = 0.0, max(gv, gain0)
        peaks.append((w, gv))

    peak = max(best_gain, max(gv for _, gv in peaks))
    attaining = [w for w, gv in peaks if gv >= peak * (1.0 - rel_tol)]
    if not attaining:
        return w_best, peak
    return min(attaining), peak
