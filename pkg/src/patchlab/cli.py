"""Command line entry point: ``patchlab <command> ...``.

Exit codes: 0 success, 1 a verification check failed or a run error, 2 a
usage or configuration error, 3 a run stopped early (partial outputs are
flagged in ``status.json``).
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, PatchlabError

EXIT_FAIL, EXIT_USAGE = 1, 2


def _fail(msg: str, code: int = EXIT_USAGE) -> int:
    print(f"patchlab: error: {msg}", file=sys.stderr)
    return code


def _parse_space(spec: str):
    """``C:r`` or ``B:s,p,q`` (p, q in 1, 2, inf)."""
    kind, _, rest = spec.partition(":")
    try:
        nums = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ConfigurationError(f"cannot parse norm space {spec!r}") from None
    if kind == "C" and len(nums) == 1:
        return nums[0], np.inf, np.inf
    if kind == "B" and len(nums) == 3:
        return tuple(nums)
    raise ConfigurationError(f"norm space must be C:r or B:s,p,q, got {spec!r}")


def _parse_domain(spec: str, dim: int):
    from .fieldops import RoundDomain

    kind, _, rest = spec.partition(":")
    want = {"disk": 2, "ball": 3}
    if kind not in want:
        raise ConfigurationError(f"domain must be disk:R or ball:R, got {spec!r}")
    if want[kind] != dim:
        raise ConfigurationError(f"{kind} domain does not match a {dim}-D field")
    try:
        radius = float(rest or 1.0)
    except ValueError:
        raise ConfigurationError(f"bad radius in {spec!r}") from None
    return RoundDomain(dim, radius)


# -- analyze / extend / velocity --------------------------------------------------------


def cmd_analyze(args) -> int:
    from .fieldops import read_snapshot
    from .lp_core import besov_report

    s, p, q = _parse_space(args.space)
    fld = read_snapshot(args.field)
    out = []
    comps = fld.components()
    for i, comp in enumerate(comps):
        rep = besov_report(comp, fld.grid, s, p, q)
        body = rep.to_csv()
        if len(comps) > 1:
            lines = body.splitlines()
            body = "\n".join([f"component,{lines[0]}"] + [f"{i},{ln}" for ln in lines[1:]]) + "\n"
            if i:
                body = body.split("\n", 1)[1]
        out.append(body)
        note = " (integer index: dyadic C^r_* norm)" if rep.integer_index else ""
        print(f"# component {i}: norm {rep.norm:.12g}{note}", file=sys.stderr)
    text = "".join(out)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_extend(args) -> int:
    from .extension import build_atlas, extend_P, extend_Pc, extend_Pdiv
    from .fieldops import read_snapshot, write_snapshot

    fld = read_snapshot(args.input)
    if fld.ncomp != fld.grid.dim:
        raise ConfigurationError(f"extension needs a {fld.grid.dim}-component vector field, got {fld.ncomp}")
    dom = _parse_domain(args.domain or ("disk:1.0" if fld.grid.dim == 2 else "ball:1.0"), fld.grid.dim)
    atlas = build_atlas(dom)
    op = {"P": extend_P, "Pc": extend_Pc, "Pdiv": extend_Pdiv}[args.op]
    ext = op(fld.values, atlas, fld.grid, r=args.r)
    write_snapshot(args.out, ext.values, fld.grid, fld.time)
    if args.report:
        Path(args.report).write_text(ext.report.to_csv())
    print(f"max divergence {ext.max_divergence:.6g}", file=sys.stderr)
    return 0


def cmd_velocity(args) -> int:
    from .biot_savart import StaticReport, static_estimate_report, velocity_from_vorticity
    from .config import stream
    from .fieldops import read_snapshot, write_snapshot
    from .patch import system_from_callables

    fld = read_snapshot(args.omega)
    g = fld.grid
    dom = _parse_domain(args.domain, g.dim)
    dom.check_fits(g)
    vel = velocity_from_vorticity(fld.values, dom, g)
    write_snapshot(args.out, vel.values, g, fld.time)
    eye = np.eye(3)
    frame = [(lambda e: (lambda x: np.broadcast_to(e, (len(x), 3))))(eye[i]) for i in range(3)]
    system = system_from_callables(g, frame, args.s)
    rep = static_estimate_report(vel, fld.values, system, r=args.r, rng=stream(args.seed, "holder-pairs"))
    report = Path(args.report) if args.report else Path(args.out).with_suffix(".csv")
    new = not report.exists() or report.stat().st_size == 0
    with open(report, "a") as fh:
        if new:
            fh.write(",".join(StaticReport.CSV_COLUMNS) + "\n")
        fh.write(rep.csv_row() + "\n")
    print(f"ratio {rep.ratio:.6g}  X {rep.X:.6g}  report {report}", file=sys.stderr)
    return 0


# -- run / scenarios --------------------------------------------------------------------


def cmd_run(args) -> int:
    from .config import load_config
    from .scenario import run_scenario

    try:
        cfg = load_config(args.config)
    except ConfigurationError as exc:
        where = args.config if not args.config.startswith("builtin:") else "config"
        if "empty scenario" in str(exc):
            print("usage: patchlab run --config FILE|builtin:NAME --out DIR [--seed N] [--sample-every K]",
                  file=sys.stderr)
        return _fail(f"{where}: {exc}")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.sample_every is not None:
        if args.sample_every < 1:
            return _fail("--sample-every must be at least 1")
        cfg = replace(cfg, integrator=replace(cfg.integrator, sample_every=args.sample_every))
    t0 = time.perf_counter()
    outcome = run_scenario(cfg, args.out)
    state = "complete" if outcome.completed else f"PARTIAL ({outcome.error})"
    print(f"{cfg.name}: {len(outcome.rows)} samples, {state}, {time.perf_counter() - t0:.1f}s -> {outcome.out}")
    return outcome.exit_code


def cmd_scenarios(args) -> int:
    from .config import BUILTINS

    for name, data in BUILTINS.items():
        print(f"{name}\t{data['mode']}")
    return 0


# -- verify -----------------------------------------------------------------------------


def _suite_job(name: str, fast: bool, seed: int):
    from .verify import run_suite

    return run_suite(name, fast=fast, seed=seed)


def cmd_verify(args) -> int:
    from .fieldops import fft_workers
    from .verify import SUITES

    names = list(SUITES) if "all" in args.suites else args.suites
    for n in names:
        if n not in SUITES:
            return _fail(f"unknown suite {n!r}; choose from {', '.join(SUITES)} or all")
    workers = min(fft_workers(), len(names))
    if workers > 1:
        os.environ["PATCHLAB_THREADS"] = "1"
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_suite_job, names, [args.fast] * len(names), [args.seed] * len(names)))
    else:
        results = [_suite_job(n, args.fast, args.seed) for n in names]
    failed = 0
    for checks in results:
        for c in checks:
            failed += not c.passed
            if args.json:
                print(c.to_json())
            else:
                crit = f" [criterion {c.criterion}]" if c.criterion else ""
                print(f"{'PASS' if c.passed else 'FAIL'} {c.suite}/{c.name}{crit} value={c.value:.6g} "
                      f"threshold={c.threshold:.6g} {c.detail}".rstrip())
    total = sum(len(c) for c in results)
    print(f"# {total - failed}/{total} checks passed", file=sys.stderr)
    return EXIT_FAIL if failed else 0


# -- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="patchlab", description="Vortex patch regularity toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="norms of a field snapshot")
    an_sub = an.add_subparsers(dest="what", required=True)
    norm = an_sub.add_parser("norm", help="per-level Besov/Holder report as CSV")
    norm.add_argument("--space", required=True, help="C:r or B:s,p,q")
    norm.add_argument("--field", required=True)
    norm.add_argument("--out", help="write the CSV here instead of stdout")
    norm.set_defaults(func=cmd_analyze)

    ex = sub.add_parser("extend", help="extend a vector field across the domain boundary")
    ex.add_argument("--op", required=True, choices=("P", "Pc", "Pdiv"))
    ex.add_argument("--in", dest="input", required=True)
    ex.add_argument("--out", required=True)
    ex.add_argument("--report", help="ExtensionReport CSV path")
    ex.add_argument("--domain", help="disk:R or ball:R (default unit disk/ball)")
    ex.add_argument("--r", type=float, default=0.5, help="Holder exponent used in the report")
    ex.set_defaults(func=cmd_extend)

    ve = sub.add_parser("velocity", help="velocity in a disk or ball from a vorticity snapshot")
    ve.add_argument("--omega", required=True)
    ve.add_argument("--domain", required=True, help="disk:R or ball:R")
    ve.add_argument("--out", required=True)
    ve.add_argument("--report", help="CSV to append the static report row to (default: OUT with .csv)")
    ve.add_argument("--r", type=float, default=0.5)
    ve.add_argument("--s", type=float, default=0.5)
    ve.add_argument("--seed", type=int, default=0)
    ve.set_defaults(func=cmd_velocity)

    ru = sub.add_parser("run", help="run a scenario into a directory")
    ru.add_argument("--config", required=True, help="scenario JSON file or builtin:<name>")
    ru.add_argument("--out", required=True)
    ru.add_argument("--seed", type=int)
    ru.add_argument("--sample-every", type=int)
    ru.set_defaults(func=cmd_run)

    sc = sub.add_parser("scenarios", help="list built-in scenarios")
    sc.set_defaults(func=cmd_scenarios)

    vf = sub.add_parser("verify", help="run verification suites")
    vf.add_argument("suites", nargs="+", help="lp, multiplier, extension, biot-savart, patch, dynamics or all")
    vf.add_argument("--fast", action="store_true")
    vf.add_argument("--json", action="store_true", help="one JSON object per check")
    vf.add_argument("--seed", type=int, default=0)
    vf.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        return _fail(str(exc))
    except PatchlabError as exc:
        return _fail(str(exc), EXIT_FAIL)
    except OSError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
