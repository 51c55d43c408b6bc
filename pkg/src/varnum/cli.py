"""Command-line entry point: ``varnum <subcommand> ...``.

Exit codes: 0 success, 2 validation failure, 3 solver non-convergence,
4 I/O or parse error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceError, DomainError, SizeError, ValidationError
from .scenario import scenario_from_dict, validate_scenario

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4


class ParseError(Exception):
    pass


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta(sc, args) -> dict:
    return {"label": sc.label, "seed": getattr(args, "seed", None), "version": __version__,
            "command": args.command}


def _emit(path: Path, text: str, meta: dict, started: float) -> None:
    """Write the artifact, then a sidecar with the wall time.

    Wall time lives outside the artifact so repeated runs stay byte-identical.
    """
    _write_atomic(path, text)
    side = dict(meta, wall_time_s=round(time.perf_counter() - started, 6))
    _write_atomic(Path(str(path) + ".meta.json"), json.dumps(side, indent=2) + "\n")


def _read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        ctx = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {ctx}") from exc


def _load(path, validate: bool = True):
    d = _read_json(path)
    if not isinstance(d, dict):
        raise ParseError(f"{path}: top level must be an object")
    try:
        return scenario_from_dict(d, validate=validate)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed scenario ({exc})") from exc


def _floats(text: str):
    return np.array([float(x) for x in text.split(",")])


def _ints(text: str):
    return [int(x) for x in text.split(",")]


def cmd_validate(args) -> int:
    sc = _load(args.scenario, validate=False)
    rep = validate_scenario(sc)
    for line in rep.lines():
        print(line)
    if rep.ok:
        print(f"OK: {sc.label} passes all {len(rep.checks)} checks")
        return EXIT_OK
    bad = rep.first_failure()
    print(f"FAILED: {bad.name}: {bad.detail}", file=sys.stderr)
    return EXIT_INVALID


def _theta0(args, sc):
    from .slot import Theta
    if args.theta0_m is None:
        return None
    m = _floats(args.theta0_m)
    v = _floats(args.theta0_v) if args.theta0_v else np.zeros_like(m)
    return Theta(m, v)


def cmd_run_avr(args) -> int:
    from .avr import run_avr
    started = time.perf_counter()
    sc = _load(args.scenario)
    trace = run_avr(sc, args.horizon, args.seed, _theta0(args, sc), stride=args.stride)
    meta = _meta(sc, args)
    buf = io.StringIO()
    buf.write(json.dumps({"meta": dict(meta, horizon=args.horizon, stride=args.stride)}) + "\n")
    snaps = {int(t): k for k, t in enumerate(trace.snapshot_t)}
    for t in range(trace.T):
        rec = {"t": t + 1, "constraint_index": int(trace.constraint_indices[t]),
               "r": trace.allocations[t].tolist(), "kkt_residual": float(trace.kkt_residuals[t])}
        k = snaps.get(t + 1)
        if k is not None:
            rec["m_hat"] = trace.snapshot_m[k].tolist()
            rec["v_hat"] = trace.snapshot_v[k].tolist()
        buf.write(json.dumps(rec) + "\n")
    _emit(Path(args.out), buf.getvalue(), meta, started)
    print(f"m_hat = {trace.m_hat.tolist()}  v_hat = {trace.v_hat.tolist()}  "
          f"max kkt residual = {trace.kkt_residuals.max():.3g}")
    return EXIT_OK


def cmd_solve_optstat(args) -> int:
    from .stationary import solve_fixed_point, solve_optstat_direct
    started = time.perf_counter()
    sc = _load(args.scenario)
    out = {"meta": _meta(sc, args)}
    if args.method in ("direct", "both"):
        out["direct"] = solve_optstat_direct(sc).to_dict()
    if args.method in ("fixed-point", "both"):
        out["fixed_point"] = solve_fixed_point(sc).to_dict()
    if args.method == "both":
        gap = float(np.max(np.abs(np.array(out["direct"]["r_pi"]) - np.array(out["fixed_point"]["r_pi"]))))
        out["disagreement_inf"] = gap
        print(f"direct vs fixed-point disagreement (inf-norm): {gap:.3g}")
    for key in ("direct", "fixed_point"):
        if key in out:
            s = out[key]
            print(f"{key}: m_pi = {s['m_pi']}  v_pi = {s['v_pi']}  phi_pi = {s['phi_pi']:.10g}  "
                  f"kkt = {s['kkt_residual']:.3g}")
    _emit(Path(args.out), json.dumps(out, indent=2) + "\n", out["meta"], started)
    return EXIT_OK


def cmd_solve_offline(args) -> int:
    from .offline import solve_opt_T
    from .process import sample_path
    started = time.perf_counter()
    sc = _load(args.scenario)
    idx = sample_path(sc.process, args.horizon, args.seed).indices
    traj = solve_opt_T(sc.batch.take(idx), sc.users, sc.r_min, tol=args.tol)
    out = {"meta": dict(_meta(sc, args), horizon=args.horizon),
           "constraint_indices": idx.tolist(), **traj.to_dict()}
    _emit(Path(args.out), json.dumps(out) + "\n", out["meta"], started)
    print(f"phi_T = {traj.phi_T:.10g}  kkt = {traj.kkt_residual:.3g}  iterations = {traj.iterations}")
    return EXIT_OK


def cmd_solve_slot(args) -> int:
    from .slot import Theta, solve_optavr
    started = time.perf_counter()
    sc = _load(args.scenario)
    if not 0 <= args.state < sc.n_states:
        raise ValidationError(f"state {args.state} outside 0..{sc.n_states - 1}")
    if args.theta is not None:
        vals = _floats(args.theta)
        if vals.size != 2 * sc.n_users:
            raise ValidationError(f"--theta needs {2 * sc.n_users} values, got {vals.size}")
        theta = Theta(vals[:sc.n_users], vals[sc.n_users:])
    elif args.m is not None and args.v is not None:
        theta = Theta(_floats(args.m), _floats(args.v))
    else:
        raise ValidationError("give either --theta or both --m and --v")
    if theta.m.size != sc.n_users:
        raise ValidationError(f"expected {sc.n_users} means, got {theta.m.size}")
    if not theta.in_box(sc.r_min, sc.r_max, sc.v_max):
        raise ValidationError("theta lies outside H")
    sol = solve_optavr(theta, sc.constraints[args.state], sc.users, sc.r_min)
    out = {"meta": _meta(sc, args), "state": args.state, "m": theta.m.tolist(),
           "v": theta.v.tolist(), "r_star": sol.r_star.tolist(), "mu_star": sol.mu_star,
           "gamma_star": sol.gamma_star.tolist(), "h_value": sol.h_value,
           "kkt_residual": sol.kkt_residual}
    _emit(Path(args.out), json.dumps(out, indent=2) + "\n", out["meta"], started)
    print(f"r* = {sol.r_star.tolist()}  h = {sol.h_value:.10g}  kkt = {sol.kkt_residual:.3g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .metrics import gap_experiment
    started = time.perf_counter()
    sc = _load(args.scenario)
    rep = gap_experiment(sc, _ints(args.horizons), args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "phi_avr", "phi_oracle", "gap"])
    for T, a, o, g in rep.rows():
        w.writerow([T, repr(a), repr(o), repr(g)])
        print(f"T={T:>7d}  phi_avr={a:.8f}  phi_oracle={o:.8f}  gap={g:.3e}")
    _emit(Path(args.out), buf.getvalue(), _meta(sc, args), started)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varnum", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, seed=False, out=True):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--scenario", required=True)
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if out:
            sp.add_argument("--out", required=True)
        sp.set_defaults(func=fn)
        return sp

    add("validate", cmd_validate, "check every modelling assumption", out=False)
    sp = add("run-avr", cmd_run_avr, "run the online allocator", seed=True)
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--stride", type=int, default=100)
    sp.add_argument("--theta0-m", help="comma-separated initial means")
    sp.add_argument("--theta0-v", help="comma-separated initial variances")
    sp = add("solve-optstat", cmd_solve_optstat, "solve the stationary problem")
    sp.add_argument("--method", choices=["direct", "fixed-point", "both"], default="both")
    sp = add("solve-offline", cmd_solve_offline, "solve the offline problem on a sampled path",
             seed=True)
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp = add("solve-slot", cmd_solve_slot, "solve one slot problem")
    sp.add_argument("--state", "--constraint-index", dest="state", type=int, default=0)
    sp.add_argument("--theta", help="2N comma-separated values: means then variances")
    sp.add_argument("--m", help="comma-separated tracked means")
    sp.add_argument("--v", help="comma-separated tracked variances")
    sp = add("compare", cmd_compare, "online vs offline objective gap", seed=True)
    sp.add_argument("--horizons", default="100,1000,10000")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConvergenceError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValidationError, DomainError, SizeError, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
