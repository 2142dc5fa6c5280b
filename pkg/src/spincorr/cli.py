"""Command-line front end.

Every command writes CSV (default) or JSON to stdout or, with ``--out``, to a
file replaced atomically.  Exit codes: 0 success, 1 verification failure,
2 usage or precondition error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import analysis, oracle
from .correlations import correlations
from .model import Couplings, DomainError, EffectiveParams, dense_matrix, effective_params, gibbs_state

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

RAW_FLAGS = ("jx", "jy", "dz", "gz")
EFFECTIVE_FLAGS = ("r1", "r2")
MAX_PHASE_CELLS = 10**7


class UsageError(Exception):
    """Bad flag combination or precondition; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# output


def write_output(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = os.path.abspath(out)
    fd, tmp = tempfile.mkstemp(prefix=".spincorr-", dir=os.path.dirname(target))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render(columns: Sequence[str], rows: List[Sequence], meta: Dict, fmt_name: str) -> str:
    if fmt_name == "json":
        body = {"columns": list(columns), "rows": [[_jsonable(v) for v in r] for r in rows]}
        body.update(meta)
        return json.dumps(body, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(fmt(v) for v in r) + "\n")
    for key, val in meta.items():
        buf.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# parameters


def _add_params(p: argparse.ArgumentParser, raw: bool = True) -> None:
    g = p.add_argument_group("parameters")
    g.add_argument("--effective", action="store_true", help="use (jz, r1, r2) instead of raw couplings")
    g.add_argument("--jz", type=float, default=None)
    g.add_argument("--r1", type=float, default=None)
    g.add_argument("--r2", type=float, default=None)
    if raw:
        for name in RAW_FLAGS:
            g.add_argument(f"--{name}", type=float, default=None)


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="write to this file (atomically) instead of stdout")


def params_from_args(args) -> object:
    """Couplings for the raw picture, EffectiveParams with --effective."""
    given = lambda names: [n for n in names if getattr(args, n, None) is not None]  # noqa: E731
    if args.effective:
        mixed = given(RAW_FLAGS)
        if mixed:
            raise UsageError(f"--effective cannot be combined with raw flags {['--' + n for n in mixed]}")
        vals = [getattr(args, n) or 0.0 for n in ("jz", "r1", "r2")]
        try:
            return EffectiveParams(*vals)
        except DomainError as exc:
            raise UsageError(str(exc)) from exc
    mixed = given(EFFECTIVE_FLAGS)
    if mixed:
        raise UsageError(f"{['--' + n for n in mixed]} require --effective")
    vals = {n: getattr(args, n, None) or 0.0 for n in RAW_FLAGS + ("jz",)}
    try:
        return Couplings(**vals)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def describe(p) -> Dict:
    e = effective_params(p) if isinstance(p, Couplings) else p
    out = {"jz": e.jz, "r1": e.r1, "r2": e.r2}
    if isinstance(p, Couplings):
        out = {"parameterization": "raw", "jx": p.jx, "jy": p.jy, "jz": p.jz, "dz": p.dz, "gz": p.gz,
               "effective": out}
    else:
        out["parameterization"] = "effective"
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_curve(args) -> int:
    p = params_from_args(args)
    lo, hi, steps = analysis.default_t_range(p)
    lo = lo if args.tmin is None else args.tmin
    hi = hi if args.tmax is None else args.tmax
    steps = steps if args.steps is None else args.steps
    if not (lo > 0 and hi > 0):
        raise UsageError("temperatures must be positive")
    try:
        spec = analysis.SweepSpec(p, "T", (lo, hi, steps), log=not args.linear)
    except analysis.SpecError as exc:
        raise UsageError(str(exc)) from exc
    tab = analysis.sweep(spec)
    rows = [
        (t, tab.values["Q"][i], tab.values["U"][i], tab.values["F"][i],
         tab.active["Q"][i].value, tab.active["U"][i].value, tab.active["F"][i].value)
        for i, t in enumerate(tab.x)
    ]
    cl = analysis.classify_table(tab)
    behavior = {}
    for m, b in cl.per_measure.items():
        if isinstance(b, analysis.BehaviorType):
            behavior[m] = {"kind": b.kind, "extrema": [[e.t, e.value, e.kind] for e in b.extrema]}
        else:
            behavior[m] = {"kind": None, "error": str(b)}
    meta = {"params": describe(p), "behavior": behavior, "consensus": cl.consensus}
    cols = ("T", "Q", "U", "F", "Q_branch", "U_branch", "F_branch")
    write_output(render(cols, rows, meta, args.format), args.out)
    return EXIT_OK


def _phase_cell(args):
    jz, r1, r2, t = args
    p = EffectiveParams(jz, r1, r2)
    reg = analysis.region(p)
    if t is None:
        q, u, f = analysis.zero_t_measures(p, verify=False)
    else:
        r = correlations(gibbs_state(p, t))
        q, u, f = r.q.value, r.u.value, r.f.value
    return (r1, r2, reg, q, u, f)


def cmd_phase(args) -> int:
    if args.t0 == (args.t is not None):
        raise UsageError("give exactly one of --t or --t0")
    if args.t is not None and not args.t > 0:
        raise UsageError("temperature must be positive")
    (a1, b1, n1), (a2, b2, n2) = args.r1_range, args.r2_range
    n1, n2 = int(n1), int(n2)
    if n1 < 1 or n2 < 1 or min(a1, b1, a2, b2) < 0:
        raise UsageError("grid ranges need non-negative bounds and at least one point")
    if n1 * n2 > MAX_PHASE_CELLS:
        raise UsageError(f"grid of {n1 * n2} points exceeds {MAX_PHASE_CELLS}")
    jz = args.jz or 0.0
    cells = [(jz, float(r1), float(r2), args.t) for r1 in np.linspace(a1, b1, n1) for r2 in np.linspace(a2, b2, n2)]
    rows = analysis.parallel_map(_phase_cell, cells)
    meta = {"params": {"jz": jz, "t": args.t if args.t is not None else 0.0, "mode": "t0" if args.t0 else "thermal"}}
    write_output(render(("r1", "r2", "region", "Q", "U", "F"), rows, meta, args.format), args.out)
    return EXIT_OK


def cmd_sudden(args) -> int:
    p = params_from_args(args)
    if not args.t > 0:
        raise UsageError("temperature must be positive")
    if isinstance(p, Couplings) and args.axis != "jz":
        p = effective_params(p)
    try:
        spec = analysis.SweepSpec(p, args.axis, (args.min, args.max, args.steps), t=args.t)
    except analysis.SpecError as exc:
        raise UsageError(str(exc)) from exc
    events = analysis.detect_sudden_changes(spec)
    rows = [(e.measure, e.axis_value, e.jump, e.kind, e.boundary) for e in events]
    meta = {"params": describe(p), "axis": args.axis, "t": args.t,
            "analytic": analysis.boundary_crossings(spec)}
    write_output(render(("measure", "axis_value", "jump", "kind", "boundary"), rows, meta, args.format), args.out)
    return EXIT_OK


def cmd_asymptote(args) -> int:
    p = params_from_args(args)
    try:
        rep = analysis.asymptote_check(p, args.temps)
    except analysis.PreconditionError as exc:
        raise UsageError(str(exc)) from exc
    rows = [(r.branch, r.c2, r.fit_c2, r.err_c2, r.c3, r.fit_c3, r.err_c3, "1" if r.active else "0") for r in rep.rows]
    meta = {"params": describe(p), "temperatures": list(rep.t_values), "notes": list(rep.notes),
            "c2_ok": rep.c2_ok, "c3_ok": rep.c3_ok}
    cols = ("branch", "c2", "fit_c2", "err_c2", "c3", "fit_c3", "err_c3", "active")
    write_output(render(cols, rows, meta, args.format), args.out)
    return EXIT_OK if rep.c2_ok else EXIT_FAIL


def cmd_zerot(args) -> int:
    p = params_from_args(args)
    e = effective_params(p) if isinstance(p, Couplings) else p
    try:
        q, u, f = analysis.zero_t_measures(e, verify=True)
    except analysis.ConsistencyError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL
    rows = [(analysis.region(e), q, u, f)]
    meta = {"params": describe(p), "ground": list(analysis.ground_manifold(e))}
    write_output(render(("region", "Q", "U", "F"), rows, meta, args.format), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification


def sample_points(n: int, seed: int):
    """(jz, r1, r2, T): couplings uniform in [0, 5], T log-uniform in [0.05, 50]."""
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(n):
        jz, r1, r2 = rng.uniform(0.0, 5.0, 3)
        t = math.exp(rng.uniform(math.log(0.05), math.log(50.0)))
        pts.append((float(jz), float(r1), float(r2), t))
    return pts


def oracle_deviation(pt) -> tuple:
    """|closed form - brute force| for (Q, U, F) at one point."""
    jz, r1, r2, t = pt
    s = gibbs_state(EffectiveParams(jz, r1, r2), t)
    r = correlations(s, check=True)
    # extended precision keeps tiny Bell weights intact through the square roots
    q, u, f = oracle.all_measures(dense_matrix(s, dtype=np.clongdouble))
    return abs(r.q.value - q), abs(r.u.value - u), abs(r.f.value - f)


def run_verify(samples: int, seed: int, tol_q: float, tol_u: float, tol_f: float,
               invariance_samples: int = 25, log=None) -> int:
    log = log or (lambda s: None)
    pts = sample_points(samples, seed)
    t0 = time.perf_counter()
    devs = analysis.parallel_map(oracle_deviation, pts, min_rows=64)
    tols = (tol_q, tol_u, tol_f)
    worst = [0.0, 0.0, 0.0]
    failures = []
    for pt, d in zip(pts, devs):
        for k in range(3):
            worst[k] = max(worst[k], d[k])
            if not d[k] <= tols[k]:
                failures.append(("oracle", "QUF"[k], pt, d[k]))
    log(f"oracle: max |dQ| = {worst[0]:.3e}  max |dU| = {worst[1]:.3e}  max |dF| = {worst[2]:.3e}"
        f"  ({len(pts)} points, {time.perf_counter() - t0:.1f} s)")

    # mirror symmetry (jz, r1, r2) -> (-jz, r2, r1), closed forms only
    mirror = 0.0
    for pt in pts:
        jz, r1, r2, t = pt
        a = correlations(gibbs_state(EffectiveParams(jz, r1, r2), t))
        b = correlations(gibbs_state(EffectiveParams(-jz, r2, r1), t))
        d = max(abs(a.q.value - b.q.value), abs(a.u.value - b.u.value), abs(a.f.value - b.f.value))
        mirror = max(mirror, d)
        if d > 1e-12:
            failures.append(("mirror", "QUF", pt, d))
    log(f"mirror symmetry: max deviation {mirror:.3e}")

    # phases of u, v and local unitaries must not change the oracle measures
    rng = np.random.default_rng(seed + 1)
    lu = fixed_transforms_local()
    phase_dev = unit_dev = 0.0
    for pt in pts[:invariance_samples]:
        jz, r1, r2, t = pt
        s = gibbs_state(EffectiveParams(jz, r1, r2), t)
        rho = dense_matrix(s, dtype=np.clongdouble)
        ref = np.array(oracle.all_measures(rho))
        ang = rng.uniform(0, 2 * math.pi, 2).astype(np.longdouble)
        ph = tuple(np.cos(ang) + 1j * np.sin(ang))
        got = np.array(oracle.all_measures(dense_matrix(s, phases=ph, dtype=np.clongdouble)))
        d = float(np.max(np.abs(got - ref)))
        phase_dev = max(phase_dev, d)
        if d > max(tol_u, tol_q):
            failures.append(("phase", "QUF", pt, d))
        mats = dict(lu)
        mats["random"] = np.kron(oracle.unitarize(oracle.random_qubit_unitary(rng)),
                                 oracle.unitarize(oracle.random_qubit_unitary(rng)))
        for name, m in mats.items():
            got = np.array(oracle.all_measures(oracle.conjugate(rho, oracle.unitarize(m))))
            d = float(np.max(np.abs(got - ref)))
            unit_dev = max(unit_dev, d)
            if d > max(tol_u, tol_q):
                failures.append((f"local unitary {name}", "QUF", pt, d))
    log(f"phase irrelevance: max deviation {phase_dev:.3e}")
    log(f"local-unitary invariance: max deviation {unit_dev:.3e}")

    for what, m, pt, d in failures[:20]:
        log(f"FAIL {what} {m}: jz={pt[0]!r} r1={pt[1]!r} r2={pt[2]!r} T={pt[3]!r} deviation {d:.3e}")
    if failures:
        log(f"{len(failures)} violation(s)")
        return EXIT_FAIL
    log("all checks passed")
    return EXIT_OK


def fixed_transforms_local() -> Dict[str, np.ndarray]:
    """The local members of the fixed transforms (R is a two-qubit basis change)."""
    return {k: v for k, v in oracle.fixed_transforms().items() if k != "R"}


def cmd_verify(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    lines: List[str] = []
    code = run_verify(args.samples, args.seed, args.tol_q, args.tol_u, args.tol_f,
                      invariance_samples=min(args.samples, args.invariance_samples), log=lines.append)
    write_output("\n".join(lines) + "\n", args.out)
    return code


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="spincorr", description="Thermal quantum correlations of the XYZ + DM + KSEA two-qubit chain.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("curve", help="Q, U, F against temperature")
    _add_params(c)
    c.add_argument("--tmin", type=float, default=None)
    c.add_argument("--tmax", type=float, default=None)
    c.add_argument("--steps", type=int, default=None)
    c.add_argument("--linear", action="store_true", help="linear instead of log-spaced T grid")
    _add_output(c)
    c.set_defaults(func=cmd_curve)

    ph = sub.add_parser("phase", help="(r1, r2) map at fixed jz")
    ph.add_argument("--jz", type=float, default=0.0)
    ph.add_argument("--t", type=float, default=None)
    ph.add_argument("--t0", action="store_true", help="zero-temperature limit instead of a thermal state")
    ph.add_argument("--r1-range", type=float, nargs=3, metavar=("MIN", "MAX", "N"), default=(0.0, 5.0, 101))
    ph.add_argument("--r2-range", type=float, nargs=3, metavar=("MIN", "MAX", "N"), default=(0.0, 5.0, 101))
    _add_output(ph)
    ph.set_defaults(func=cmd_phase)

    s = sub.add_parser("sudden", help="derivative jumps along r1, r2 or jz")
    _add_params(s)
    s.add_argument("--axis", choices=("r1", "r2", "jz"), required=True)
    s.add_argument("--min", type=float, required=True)
    s.add_argument("--max", type=float, required=True)
    s.add_argument("--steps", type=int, default=4001)
    s.add_argument("--t", type=float, required=True)
    _add_output(s)
    s.set_defaults(func=cmd_sudden)

    v = sub.add_parser("verify", help="closed forms against brute-force oracles")
    v.add_argument("--samples", type=int, default=500)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--tol-q", type=float, default=1e-6)
    v.add_argument("--tol-u", type=float, default=1e-8)
    v.add_argument("--tol-f", type=float, default=1e-8)
    v.add_argument("--invariance-samples", type=int, default=25)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("asymptote", help="high-temperature coefficients")
    _add_params(a)
    a.add_argument("--temps", type=float, nargs="+", default=None)
    _add_output(a)
    a.set_defaults(func=cmd_asymptote)

    z = sub.add_parser("zerot", help="zero-temperature limit")
    _add_params(z)
    _add_output(z)
    z.set_defaults(func=cmd_zerot)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command == "asymptote" and args.temps is None:
            e = params_from_args(args)
            e = effective_params(e) if isinstance(e, Couplings) else e
            base = max(50.0, 10.0 * max(abs(e.jz), e.r1, e.r2))
            args.temps = [base, 2 * base, 4 * base]
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"spincorr: error: {exc}\n")
        return EXIT_USAGE
    except (DomainError, analysis.SpecError, analysis.PreconditionError) as exc:
        sys.stderr.write(f"spincorr: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
