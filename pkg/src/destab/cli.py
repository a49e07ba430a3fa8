"""``destab`` command line: analyze, synth, verify, sweep, simulate, example.

Exit codes: 0 success or PASS, 1 certificate FAIL, 2 precondition or
numerical failure (unstable plant, ill-posed loop, ...), 3 malformed
input, 4 dimension mismatch.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import dynexpr, hinf, lti, nonlin, synth, verify
from .errors import DestabError, DimensionError, ParseError

VERSION = "destab-v1"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PRECONDITION = 2
EXIT_PARSE = 3
EXIT_DIMENSION = 4


class Loaded:
    """A system file: always a linear model, plus the nonlinear one when given."""

    def __init__(self, linear, nonlinear=None):
        self.linear = linear
        self.nonlinear = nonlinear

    def simulation_model(self):
        return self.nonlinear if self.nonlinear is not None else nonlin.from_state_space(self.linear)


def _read_json(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    if doc.get("version") != VERSION:
        raise ParseError(f"{path}: expected version {VERSION!r}, got {doc.get('version')!r}")
    return doc


def _matrices(block, where):
    if not isinstance(block, dict):
        raise ParseError(f"{where}: 'matrices' must be an object with A, B, C, D")
    try:
        parts = [block[k] for k in "ABCD"]
    except KeyError as exc:
        raise ParseError(f"{where}: missing matrix {exc.args[0]}") from None
    for name, mat in zip("ABCD", parts):
        if not isinstance(mat, list) or any(not isinstance(row, list) for row in mat):
            raise ParseError(f"{where}: matrix {name} must be a list of rows")
    try:
        arrays = [np.array(p, dtype=float) for p in parts]
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None
    return lti.StateSpace(*arrays)


def _matrices_json(g):
    return {k: m.tolist() for k, m in zip("ABCD", (g.a, g.b, g.c, g.d))}


def load_system(path) -> Loaded:
    doc = _read_json(path)
    if "matrices" in doc:
        return Loaded(_matrices(doc["matrices"], path))
    spec = doc.get("nonlinear")
    if not isinstance(spec, dict):
        raise ParseError(f"{path}: need either 'matrices' or 'nonlinear'")
    try:
        n, m = int(spec["state_dim"]), int(spec["input_dim"])
        eqs, outs = list(spec["equations"]), list(spec.get("outputs", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad nonlinear block ({exc})") from None
    if not all(isinstance(e, str) for e in eqs + outs):
        raise ParseError(f"{path}: equations and outputs must be strings")
    field = dynexpr.parse_field(eqs, outs, n, m)
    exact = _matrices(spec["linearization"], path) if "linearization" in spec else None
    model = nonlin.from_field_spec(field, exact)
    return Loaded(nonlin.linearize(model), model)


def example_document():
    lin = nonlin.cubic_oscillator_linearization()
    return {
        "version": VERSION,
        "name": "cubic_oscillator",
        "nonlinear": {
            "state_dim": 2,
            "input_dim": 1,
            "equations": list(nonlin.CUBIC_OSCILLATOR_EQUATIONS),
            "outputs": list(nonlin.CUBIC_OSCILLATOR_OUTPUTS),
            "linearization": _matrices_json(lin),
        },
    }


def attack_document(att: synth.AttackSystem):
    omega0 = att.target_omega0
    return {
        "version": VERSION,
        "matrices": _matrices_json(att.realization),
        "metadata": {
            "omega0": omega0 if omega0 is not None and math.isfinite(omega0) else None,
            "claimed_norm": att.claimed_norm,
            "construction": att.construction,
            "epsilon": att.epsilon,
            "near_minimal_eps": att.near_minimal_eps,
        },
    }


def load_attack(path) -> synth.AttackSystem:
    doc = _read_json(path)
    realization = _matrices(doc.get("matrices"), path)
    meta = doc.get("metadata") or {}
    if not isinstance(meta, dict):
        raise ParseError(f"{path}: 'metadata' must be an object")
    construction = meta.get("construction", "siso")
    if construction not in ("siso", "mimo", "near_minimal"):
        raise ParseError(f"{path}: unknown construction {construction!r}")
    try:
        omega0 = meta.get("omega0")
        omega0 = None if omega0 is None else float(omega0)
        claimed = float(meta.get("claimed_norm", math.nan))
        eps = float(meta.get("epsilon", 0.0))
        nm = meta.get("near_minimal_eps")
        nm = None if nm is None else float(nm)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad metadata ({exc})") from None
    form = synth.AttackForm("loaded", scaling=1.0 + eps)
    return synth.AttackSystem(realization, form, omega0, claimed, construction, eps, nm)


def _pairs(vec):
    return [[float(z.real), float(z.imag)] for z in np.asarray(vec, dtype=complex)]


def _class_json(cls):
    if cls is None:
        return None
    return {"class": cls.tag, "rightmost": [float(cls.rightmost.real), float(cls.rightmost.imag)]}


def _print_json(obj, out):
    out.write(json.dumps(obj, indent=2) + "\n")


def _check_dims(g, att):
    delta = att.realization
    if delta.m != g.p or delta.p != g.m:
        raise DimensionError(
            f"plant has {g.m} inputs and {g.p} outputs but attack is {delta.p}x{delta.m}"
        )


def cmd_analyze(args, out):
    g = load_system(args.system).linear
    stab = lti.classify(g)
    cp = hinf.hinf_norm(g, rel_tol=args.tol)
    _print_json(
        {
            "stability": stab.tag,
            "rightmost": [float(stab.rightmost.real), float(stab.rightmost.imag)],
            "hinf_norm": cp.peak,
            "omega0": None if cp.at_infinity else cp.omega0,
            "sigma1": cp.peak,
            "u": _pairs(cp.u),
            "v": _pairs(cp.v),
            "at_infinity": cp.at_infinity,
        },
        out,
    )
    return EXIT_OK


def _certificate_json(cert, ok):
    return {
        "destabilization_residual": cert.destabilization_residual,
        "minimality_residual": cert.minimality_residual,
        "well_posed": cert.well_posed,
        "closed_loop": _class_json(cert.closed_loop_class),
        "omega0": cert.omega0,
        "plant_norm": cert.plant_norm,
        "attack_norm": cert.attack_norm,
        "result": "PASS" if ok else "FAIL",
    }


def cmd_synth(args, out):
    g = load_system(args.system).linear
    att = synth.synthesize(g, near_minimal_eps=args.eps_near_minimal)
    if args.scale:
        att = synth.scale_attack(att, args.scale)
    doc = attack_document(att)
    if args.out:
        with open(args.out, "w") as fh:
            _print_json(doc, fh)
    else:
        _print_json(doc, out)
    cert = verify.certify(g, att)
    ok = verify.passes(cert, att.near_minimal_eps)
    summary = sys.stderr if not args.out else out
    summary.write(
        f"construction={att.construction} states={att.realization.n} "
        f"claimed_norm={att.claimed_norm:.17g} certificate={'PASS' if ok else 'FAIL'}\n"
    )
    return EXIT_OK


def cmd_verify(args, out):
    g = load_system(args.system).linear
    att = load_attack(args.attack)
    _check_dims(g, att)
    cert = verify.certify(g, att)
    ok = verify.passes(cert, att.near_minimal_eps)
    _print_json(_certificate_json(cert, ok), out)
    out.write("PASS\n" if ok else "FAIL\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args, out):
    g = load_system(args.system).linear
    att = load_attack(args.attack)
    _check_dims(g, att)
    cert = verify.certify(g, att)
    if not verify.passes(cert, att.near_minimal_eps):
        sys.stderr.write("attack does not certify against this plant; refusing to sweep\n")
        return EXIT_FAIL
    branch = verify.trace_branch(g, att, eps_max=args.eps_max, steps=args.steps)
    lines = ["eps,re_lambda,im_lambda"]
    lines += ["%.17g,%.17g,%.17g" % (e, z.real, z.imag) for e, z in branch.samples]
    lines.append("# crossing_rate=%.17g" % branch.crossing_rate)
    if branch.truncated:
        lines.append(f"# note={branch.note}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def _parse_vector(text):
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise ParseError(f"cannot read {text!r} as a comma-separated vector") from None


def cmd_simulate(args, out):
    loaded = load_system(args.system)
    model = loaded.simulation_model()
    if args.no_attack == bool(args.attack):
        raise ParseError("give exactly one of an attack file or --no-attack")
    att = None
    if args.attack:
        att = load_attack(args.attack)
        _check_dims(loaded.linear, att)
        if args.attack_eps:
            att = synth.scale_attack(att, args.attack_eps)
    field = nonlin.close_loop(model, att)
    x0 = _parse_vector(args.x0)
    if x0.size == model.state_dim and field.dim > x0.size:
        x0 = np.concatenate((x0, np.zeros(field.dim - x0.size)))
    traj = nonlin.integrate(field, x0, args.t_final, dt=args.dt, method=args.method)
    if args.out:
        nonlin.write_csv(traj, args.out)
    else:
        nonlin.write_csv(traj, out)
    out.write(f"verdict={traj.verdict}\n")
    return EXIT_OK


def cmd_example(args, out):
    _print_json(example_document(), out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="destab", description="Minimal destabilizing feedback attacks on LTI plants.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="stability class, H-infinity norm and critical frequency")
    a.add_argument("system")
    a.add_argument("--tol", type=float, default=1e-8, help="relative tolerance of the norm")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", help="synthesize a minimal attack")
    s.add_argument("system")
    s.add_argument("--eps-near-minimal", type=float, default=None,
                   help="allow an attack within (1+eps) of minimal when the peak is at infinity")
    s.add_argument("--scale", type=float, default=0.0, metavar="EPS",
                   help="write the (1+EPS)-scaled attack instead")
    s.add_argument("--out", help="attack file to write (default: stdout)")
    s.set_defaults(func=cmd_synth)

    v = sub.add_parser("verify", help="certify an attack; exit 0 iff PASS")
    v.add_argument("system")
    v.add_argument("attack")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="closed-loop eigenvalue branch under (1+eps) scaling, as CSV")
    w.add_argument("system")
    w.add_argument("attack")
    w.add_argument("--eps-max", type=float, default=0.2)
    w.add_argument("--steps", type=int, default=41)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    m = sub.add_parser("simulate", help="integrate the closed loop and print a verdict")
    m.add_argument("system")
    m.add_argument("attack", nargs="?")
    m.add_argument("--no-attack", action="store_true")
    m.add_argument("--attack-eps", type=float, default=0.0, help="scale the attack by (1+eps)")
    m.add_argument("--x0", required=True, help="comma-separated initial state")
    m.add_argument("--t-final", type=float, default=200.0)
    m.add_argument("--dt", type=float, default=1e-3)
    m.add_argument("--method", choices=("rk4", "rk45"), default="rk45")
    m.add_argument("--out", help="trajectory CSV (default: stdout)")
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("example", help="print the built-in cubic oscillator system file")
    e.set_defaults(func=cmd_example)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except ParseError as exc:
        sys.stderr.write(f"destab: parse error: {exc}\n")
        return EXIT_PARSE
    except DimensionError as exc:
        sys.stderr.write(f"destab: dimension mismatch: {exc}\n")
        return EXIT_DIMENSION
    except OSError as exc:
        sys.stderr.write(f"destab: {exc}\n")
        return EXIT_PARSE
    except (DestabError, ArithmeticError, ValueError) as exc:
        sys.stderr.write(f"destab: {exc}\n")
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
