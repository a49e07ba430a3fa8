"""Nonlinear exposed systems, closed loops with an LTI attack, and simulation.

A :class:`NonlinearSystem` is ``x' = f(x, w)``, ``r = g(x, w)`` with an
equilibrium at the origin. :func:`close_loop` wires an attack
``Delta = (At, Bt, Ct, Dt)`` around it, driven by the nonlinear output:
``w = Ct xt + Dt g(x)`` and ``xt' = At xt + Bt g(x)``. Trajectories get an
empirical verdict (Converged / Diverged / Inconclusive).
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from . import dynexpr, lti
from .errors import DimensionError, IntegrationError, NumericError, PreconditionError, WellPosednessError

EQUILIBRIUM_TOL = 1e-12
FD_STEP = 1e-6
LYAPUNOV_STEP = 1e-7
LINEARIZATION_TOL = 1e-6

CONVERGED = "Converged"
DIVERGED = "Diverged"
INCONCLUSIVE = "Inconclusive"

ENVELOPE_WINDOWS = 10
# each window's peak norm must undercut the previous one by this fraction
MIN_WINDOW_CONTRACTION = 1e-6


@dataclass(frozen=True, eq=False)
class NonlinearSystem:
    state_dim: int
    input_dim: int
    output_dim: int
    vector_field: object
    output_map: object
    linearization: lti.StateSpace | None = None
    name: str = ""

    def __post_init__(self):
        x0, w0 = np.zeros(self.state_dim), np.zeros(self.input_dim)
        dx = np.asarray(self.vector_field(x0, w0), dtype=float).reshape(-1)
        r = np.asarray(self.output_map(x0, w0), dtype=float).reshape(-1)
        if dx.shape != (self.state_dim,) or r.shape != (self.output_dim,):
            raise DimensionError(
                f"f returned {dx.shape[0]} values (want {self.state_dim}), "
                f"g returned {r.shape[0]} (want {self.output_dim})"
            )
        if not np.all(np.abs(dx) <= EQUILIBRIUM_TOL) or not np.all(np.abs(r) <= EQUILIBRIUM_TOL):
            raise PreconditionError("the origin must be an equilibrium with zero output")
        lin = self.linearization
        if lin is not None and (lin.n, lin.m, lin.p) != (self.state_dim, self.input_dim, self.output_dim):
            raise DimensionError("provided linearization does not match the system dimensions")

    def f(self, x, w):
        return np.asarray(self.vector_field(x, w), dtype=float)

    def g(self, x, w):
        return np.asarray(self.output_map(x, w), dtype=float)


def from_field_spec(spec: dynexpr.FieldSpec, linearization=None, name=""):
    return NonlinearSystem(
        spec.state_dim, spec.input_dim, spec.output_dim,
        spec.vector_field, spec.output_map, linearization, name,
    )


def from_state_space(g: lti.StateSpace, name="linear"):
    """Wrap ``x' = Ax + Bw, r = Cx + Dw``; the exact matrices double as the linearization."""
    a, b, c, d = g.a, g.b, g.c, g.d
    return NonlinearSystem(
        g.n, g.m, g.p,
        lambda x, w: a @ x + b @ w,
        lambda x, w: c @ x + d @ w,
        g, name,
    )


def _jacobian(fun, at, h=FD_STEP):
    """Central differences with one Richardson step, column by column."""
    at = np.asarray(at, dtype=float)
    cols = []
    for k in range(at.size):
        e = np.zeros_like(at)
        e[k] = 1.0

        def central(step):
            return (fun(at + step * e) - fun(at - step * e)) / (2.0 * step)

        col = (4.0 * central(h / 2.0) - central(h)) / 3.0
        if not np.all(np.isfinite(col)):
            raise NumericError(f"non-finite evaluation while differentiating along coordinate {k + 1}")
        cols.append(col)
    out_dim = np.asarray(fun(at)).size
    return np.column_stack(cols) if cols else np.zeros((out_dim, 0))


def finite_difference_linearization(sys: NonlinearSystem) -> lti.StateSpace:
    n, m = sys.state_dim, sys.input_dim
    zx, zw = np.zeros(n), np.zeros(m)
    a = _jacobian(lambda x: sys.f(x, zw), zx).reshape(n, n)
    b = _jacobian(lambda w: sys.f(zx, w), zw).reshape(n, m)
    c = _jacobian(lambda x: sys.g(x, zw), zx).reshape(sys.output_dim, n)
    d = _jacobian(lambda w: sys.g(zx, w), zw).reshape(sys.output_dim, m)
    return lti.StateSpace(a, b, c, d)


def linearize(sys: NonlinearSystem) -> lti.StateSpace:
    """Jacobians of ``f`` and ``g`` at the origin.

    A supplied exact linearization is cross-checked against finite
    differences and then returned as is.
    """
    fd = finite_difference_linearization(sys)
    given = sys.linearization
    if given is None:
        return fd
    for name, x, y in zip("ABCD", (given.a, given.b, given.c, given.d), (fd.a, fd.b, fd.c, fd.d)):
        err = float(np.max(np.abs(x - y), initial=0.0))
        if err > LINEARIZATION_TOL * max(1.0, float(np.max(np.abs(x), initial=0.0))):
            raise NumericError(f"provided linearization disagrees with finite differences in {name} by {err:.3g}")
    return given


def _depends_on_input(sys: NonlinearSystem, probes=8, seed=0):
    """Numerical probe: does ``g(x, w)`` move when only ``w`` moves?"""
    if sys.input_dim == 0:
        return False
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        x = rng.uniform(-1.0, 1.0, sys.state_dim)
        w = rng.uniform(-1.0, 1.0, sys.input_dim)
        base = sys.g(x, np.zeros(sys.input_dim))
        moved = sys.g(x, w)
        if np.any(np.abs(moved - base) > EQUILIBRIUM_TOL * (1.0 + np.abs(base))):
            return True
    return False


@dataclass(frozen=True, eq=False)
class ClosedLoopField:
    """Autonomous field on ``[x; xt]``; callable as ``field(x)`` or ``field(t, x)``."""

    plant: NonlinearSystem
    attack: lti.StateSpace | None

    @property
    def dim(self):
        return self.plant.state_dim + (self.attack.n if self.attack is not None else 0)

    def __call__(self, *args):
        z = np.asarray(args[-1], dtype=float)
        sys, att = self.plant, self.attack
        n = sys.state_dim
        x = z[:n]
        zero_w = np.zeros(sys.input_dim)
        if att is None:
            return sys.f(x, zero_w)
        xt = z[n:]
        r = sys.g(x, zero_w)
        w = att.c @ xt + att.d @ r
        dx = sys.f(x, w)
        if att.n == 0:
            return dx
        return np.concatenate((dx, att.a @ xt + att.b @ r))


def close_loop(sys: NonlinearSystem, att=None) -> ClosedLoopField:
    """Feedback interconnection of ``sys`` with an attack (``None`` means no attack).

    ``att`` may be an ``AttackSystem`` or a bare ``StateSpace``. When the
    attack has feedthrough and ``g`` depends on ``w`` directly there is an
    algebraic loop that this function refuses to solve.
    """
    if att is None:
        return ClosedLoopField(sys, None)
    delta = getattr(att, "realization", att)
    if delta.m != sys.output_dim or delta.p != sys.input_dim:
        raise DimensionError(
            f"plant has {sys.input_dim} inputs and {sys.output_dim} outputs; "
            f"attack is {delta.p}x{delta.m}"
        )
    if np.any(delta.d) and _depends_on_input(sys):
        raise WellPosednessError(
            "the attack has direct feedthrough and the output map depends on w, which "
            "creates an algebraic loop; use synth.apply_wellposedness_filter to make the attack strictly proper"
        )
    return ClosedLoopField(sys, delta)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    verdict: str
    max_norm: float
    blew_up: bool = False


def _guarded(field):
    last_ok = [0.0]

    def rhs(t, x):
        dx = np.asarray(field(x), dtype=float)
        if not np.all(np.isfinite(dx)):
            raise IntegrationError("vector field returned a non-finite value", last_ok[0])
        last_ok[0] = max(last_ok[0], float(t))
        return dx

    return rhs


def _rk4(rhs, x0, t_final, dt, radius):
    steps = int(math.ceil(t_final / dt - 1e-9))
    times = np.empty(steps + 1)
    states = np.empty((steps + 1, x0.size))
    times[0], states[0] = 0.0, x0
    x, t = x0.copy(), 0.0
    for k in range(1, steps + 1):
        h = min(dt, t_final - t)
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = k * dt if k < steps else t_final
        if not np.all(np.isfinite(x)):
            raise IntegrationError("state became non-finite", float(times[k - 1]))
        times[k], states[k] = t, x
        if np.linalg.norm(x) > radius:
            return times[: k + 1], states[: k + 1], True
    return times, states, False


def _rk45(rhs, x0, t_final, dt, radius):
    def escape(t, x):
        return np.linalg.norm(x) - radius

    escape.terminal = True
    escape.direction = 1.0
    steps = int(math.ceil(t_final / dt - 1e-9))
    t_eval = np.minimum(np.arange(steps + 1) * dt, t_final)
    sol = scipy.integrate.solve_ivp(
        rhs, (0.0, t_final), x0, method="RK45", t_eval=t_eval,
        rtol=1e-8, atol=1e-10, events=escape,
    )
    if sol.status == -1:
        raise IntegrationError(sol.message, float(sol.t[-1]) if sol.t.size else 0.0)
    times, states = sol.t, sol.y.T
    blew_up = sol.status == 1
    if blew_up and sol.t_events[0].size:
        times = np.append(times, sol.t_events[0][0])
        states = np.vstack((states, sol.y_events[0][0]))
    return times, states, blew_up


def integrate(field, x0, t_final, dt=1e-3, method="rk45", blowup_radius=None) -> Trajectory:
    """Integrate the autonomous field ``x' = field(x)`` from ``x0``.

    ``rk4`` is the classical fixed-step scheme with step ``dt``. ``rk45``
    is an adaptive Dormand-Prince run (rtol 1e-8, atol 1e-10) sampled on
    the same ``dt`` grid. The run stops early once ``||x||`` exceeds
    ``blowup_radius``, default ``1e3 * max(1, ||x0||)``.
    """
    if not t_final > 0.0 or not dt > 0.0:
        raise ValueError("t_final and dt must be positive")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    dim = getattr(field, "dim", x0.size)
    if x0.size != dim:
        raise DimensionError(f"initial state has length {x0.size}, field needs {dim}")
    x0_norm = float(np.linalg.norm(x0))
    radius = blowup_radius if blowup_radius is not None else 1e3 * max(1.0, x0_norm)
    rhs = _guarded(field)
    if method == "rk4":
        times, states, blew_up = _rk4(rhs, x0, t_final, dt, radius)
    elif method == "rk45":
        times, states, blew_up = _rk45(rhs, x0, t_final, dt, radius)
    else:
        raise ValueError(f"unknown method {method!r}; use rk4 or rk45")
    norms = np.linalg.norm(states, axis=1)
    traj = Trajectory(times, states, INCONCLUSIVE, float(norms.max()), blew_up)
    verdict = classify_trajectory(traj, x0_norm)
    return Trajectory(times, states, verdict, traj.max_norm, blew_up)


def _window_peaks(norms, windows=ENVELOPE_WINDOWS):
    chunks = np.array_split(norms, min(windows, norms.size))
    return np.array([c.max() for c in chunks if c.size])


def classify_trajectory(traj: Trajectory, x0_norm: float) -> str:
    """Empirical stability verdict for a sampled trajectory.

    Diverged: the blow-up radius was hit, or the final norm exceeds
    ``10 * x0_norm`` and the last window's peak norm is above the first's.

    Converged: either the final norm is below ``1e-3 * max(1, x0_norm)``
    with a non-increasing norm over the last 20% of samples, or the
    peak norm drops strictly from each of ten equal windows to the next.
    The second route covers slow (algebraic) decay, such as a cubically
    damped oscillator, which cannot shrink by three orders of magnitude in
    a finite horizon. Bounded orbits such as a centre or a limit cycle
    fail both routes and stay Inconclusive.
    """
    if traj.blew_up:
        return DIVERGED
    norms = np.linalg.norm(np.asarray(traj.states, dtype=float), axis=1)
    if norms.size < 2:
        return INCONCLUSIVE
    final = norms[-1]
    peaks = _window_peaks(norms)
    if final > 10.0 * x0_norm and peaks[-1] > peaks[0]:
        return DIVERGED

    tail = norms[int(math.floor(0.8 * norms.size)):]
    if final < 1e-3 * max(1.0, x0_norm) and np.all(np.diff(tail) <= 1e-12 * max(1.0, x0_norm)):
        return CONVERGED
    if peaks.size >= 2 and np.all(peaks[1:] < peaks[:-1] * (1.0 - MIN_WINDOW_CONTRACTION)):
        return CONVERGED
    return INCONCLUSIVE


def lyapunov_probe(field, v, grid):
    """Largest ``Vdot = grad V . field`` over ``grid``; returns ``(max_vdot, witness)``.

    The gradient is a central difference with step 1e-7.
    """
    best, witness = -math.inf, None
    for x in grid:
        x = np.asarray(x, dtype=float)
        grad = np.empty(x.size)
        for k in range(x.size):
            e = np.zeros(x.size)
            e[k] = LYAPUNOV_STEP
            grad[k] = (v(x + e) - v(x - e)) / (2.0 * LYAPUNOV_STEP)
        vdot = float(grad @ np.asarray(field(x), dtype=float))
        if vdot > best:
            best, witness = vdot, x
    return best, witness


def write_csv(traj: Trajectory, path_or_file):
    """``t,x1,...,xk`` with 17 significant digits."""
    k = traj.states.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(k)]

    def dump(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, x in zip(traj.times, traj.states):
            w.writerow(["%.17g" % t] + ["%.17g" % v for v in x])

    if hasattr(path_or_file, "write"):
        dump(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            dump(fh)


# -- built-in examples -----------------------------------------------------

CUBIC_OSCILLATOR_EQUATIONS = ("x2", "-x1 - x2 - x2^3 + w1")
CUBIC_OSCILLATOR_OUTPUTS = ("x2",)


def cubic_oscillator_linearization():
    return lti.StateSpace([[0.0, 1.0], [-1.0, -1.0]], [[0.0], [1.0]], [[0.0, 1.0]], [[0.0]])


def cubic_oscillator() -> NonlinearSystem:
    """``x1' = x2``, ``x2' = -x1 - x2 - x2^3 + w``, ``r = x2``; linearization ``s/(s^2+s+1)``."""
    spec = dynexpr.parse_field(CUBIC_OSCILLATOR_EQUATIONS, CUBIC_OSCILLATOR_OUTPUTS, 2, 1)
    return from_field_spec(spec, cubic_oscillator_linearization(), "cubic_oscillator")


BUILTINS = {"cubic_oscillator": cubic_oscillator}


def builtin(name) -> NonlinearSystem:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"no built-in system {name!r}; known: {', '.join(sorted(BUILTINS))}") from None
