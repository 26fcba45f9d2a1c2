"""Command-line front end: ``salemcantor <command> [flags]``.

Every artifact carries the parsed config, the schedule hash, the seed and the
package version.  Failures print one JSON error record on stderr and exit
with the code attached to the exception class.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .errors import ConfigError, SalemError
from .fourier import StepMeasure, decay_profile
from .regularity import regularity_scan
from .restriction import (
    EnergyInstance,
    energy_lower_bound,
    energy_via_convolution,
    norm_below,
    q_critical,
    salem_norm_exact,
    sharpness_sweep,
    sumset_bound,
)
from .schedule import (
    VARIANTS,
    PhiSpec,
    build_dyadic_schedule,
    build_flat_schedule,
    build_general_schedule,
    rounding_drift_demo,
)
from .serialize import load_tree, save_schedule, save_tree
from .tree import DEFAULT_ATTEMPT_CAP, build_tree

OUT_ENV = "SALEMCANTOR_OUT"
COMMANDS = ("schedule", "build", "decay", "regularity", "energy", "sharpness", "drift")

log = logging.getLogger("salemcantor")


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="salemcantor", description="Random Cantor measures with Fourier decay certificates.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--variant", choices=VARIANTS, default="thm2")
        c.add_argument("--alpha", type=float, default=0.5)
        c.add_argument("--beta", type=float, default=None, help="defaults to alpha")
        c.add_argument("--phi", default="log:1", help="log:EPS, loglog:C or table:x=v,...")
        c.add_argument("--levels", type=int, default=16)
        c.add_argument("--seed", type=int, default=0)
        c.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
        c.add_argument("--format", choices=("csv", "json"), default="json")
        c.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        c.add_argument("--tree", default=None, help="load a saved tree instead of building one")
        c.add_argument("--attempt-cap", type=int, default=DEFAULT_ATTEMPT_CAP)
        c.add_argument("-v", "--verbose", action="store_true")
        if name == "decay":
            c.add_argument("--level", type=int, default=None, help="defaults to the built depth")
            c.add_argument("--kmax", type=int, default=None)
        if name == "regularity":
            c.add_argument("--depth", type=int, default=None, help="largest scale scanned")
            c.add_argument("--samples", type=int, default=32)
            c.add_argument("--delta", type=int, default=None)
        if name in ("energy", "sharpness"):
            c.add_argument("--r", type=int, default=4)
            c.add_argument("--l", type=int, default=None)
        if name == "energy":
            c.add_argument("--N", type=int, default=None)
        if name == "sharpness":
            c.add_argument("--q", type=float, nargs="+", default=[5.5])
        if name == "drift":
            c.add_argument("--L", type=int, default=100000)
    return p


def make_schedule(args):
    if args.variant == "thm2":
        return build_dyadic_schedule(args.alpha, args.levels)
    if args.variant == "thm3":
        return build_flat_schedule(args.alpha, args.levels)
    beta = args.alpha if args.beta is None else args.beta
    return build_general_schedule(args.alpha, beta, PhiSpec.parse(args.phi), args.variant == "thm1-second-part", args.levels)


def _tree(args):
    if args.tree:
        return load_tree(args.tree, workers=args.threads)
    return build_tree(make_schedule(args), args.seed, attempt_cap=args.attempt_cap, workers=args.threads)


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(OUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("verbose",)}


def _header(args, schedule=None, seed=None) -> dict:
    return {
        "version": __version__,
        "config": _config(args),
        "seed": args.seed if seed is None else seed,
        "scheduleHash": schedule.digest() if schedule is not None else None,
    }


def _write_json(path: Path, header: dict, body: dict) -> Path:
    path.write_text(json.dumps({**header, **body}, indent=1, default=str))
    return path


def _write_csv(path: Path, header: dict, fields: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, default=str) + "\n")
        w = csv.writer(fh)
        w.writerow(fields)
        w.writerows(rows)
    return path


def cmd_schedule(args) -> list[Path]:
    s = make_schedule(args)
    out = _out_dir(args)
    if args.format == "json":
        path = out / f"schedule-{args.variant}.json"
        save_schedule(s, path, _config(args))
        return [path]
    rows = [
        [N, s.psi[N], s.t[N], s.tau[N], s.Psi[N], s.T[N], s.theta(N), s.vartheta(N) if s.has_progression else 0.0,
         s.threshold(N), s.correction(N)]
        for N in range(1, s.levels + 1)
    ]
    fields = ["N", "psi", "t", "tau", "Psi", "T", "theta", "vartheta", "threshold", "correction"]
    return [_write_csv(out / f"schedule-{args.variant}.csv", _header(args, s), fields, rows)]


def cmd_build(args) -> list[Path]:
    t0 = time.perf_counter()
    tree = build_tree(make_schedule(args), args.seed, attempt_cap=args.attempt_cap, workers=args.threads)
    log.info("built depth %d in %.2fs, tree hash %s", tree.depth, time.perf_counter() - t0, tree.digest())
    out = _out_dir(args)
    paths = [out / f"tree-{args.variant}-{args.seed}.json"]
    save_tree(tree, paths[0], _config(args))
    if args.format == "csv":
        rows = [[v.level, v.attempts, v.sup_random, v.threshold, v.correction, v.sup_modified] for v in tree.verification]
        fields = ["level", "attempts", "supRandomPart", "threshold", "correction", "supModified"]
        paths.append(_write_csv(out / f"verification-{args.variant}-{args.seed}.csv", _header(args, tree.schedule), fields, rows))
    return paths


def cmd_decay(args) -> list[Path]:
    tree = _tree(args)
    level = tree.depth if args.level is None else args.level
    rep = decay_profile(StepMeasure(tree, level), args.kmax)
    out = _out_dir(args)
    head = _header(args, tree.schedule, tree.seed)
    summary = {**rep.summary(), "variant": tree.schedule.variant, "blockMaxima": rep.block_maxima()}
    paths = [_write_json(out / f"decay-{tree.schedule.variant}-{tree.seed}.json", head, summary)]
    if args.format == "csv":
        path = out / f"decay-{tree.schedule.variant}-{tree.seed}.csv"
        rep.write_csv(path, head)
        paths.append(path)
    return paths


def cmd_regularity(args) -> list[Path]:
    tree = _tree(args)
    rep = regularity_scan(tree, args.depth, args.samples, args.delta, args.seed)
    out = _out_dir(args)
    head = _header(args, tree.schedule, tree.seed)
    paths = [_write_json(out / f"regularity-{tree.schedule.variant}-{tree.seed}.json", head,
                         {**rep.summary(), "perScale": rep.per_scale()})]
    if args.format == "csv":
        path = out / f"regularity-{tree.schedule.variant}-{tree.seed}.csv"
        rep.write_csv(path, head)
        paths.append(path)
    return paths


def cmd_energy(args) -> list[Path]:
    tree = _tree(args)
    s = tree.schedule
    l = s.start_level + 1 if args.l is None else args.l
    N = min(l + 3, tree.depth) if args.N is None else args.N
    inst = EnergyInstance.from_tree(tree, l, N, args.r)
    M = energy_via_convolution(inst)
    body = {
        "l": l,
        "N": N,
        "r": args.r,
        "points": len(inst.points),
        "energy": M,
        "energyLower": str(energy_lower_bound(s, l, N, args.r)),
        "sumsetBound": sumset_bound(s, l, N, args.r),
        "salemNorm": str(salem_norm_exact(tree, l, N, args.r)),
        "normBelow": str(norm_below(s, l, args.r)),
    }
    return [_write_json(_out_dir(args) / f"energy-{s.variant}-{tree.seed}.json", _header(args, s, tree.seed), body)]


def cmd_sharpness(args) -> list[Path]:
    s = load_tree(args.tree).schedule if args.tree else make_schedule(args)
    rows = []
    for q in args.q:
        for c in sharpness_sweep(s, q, args.r):
            rows.append({**c.row(), "compensated": c.compensated(s)})
    out = _out_dir(args)
    head = _header(args, s)
    paths = [_write_json(out / f"sharpness-{s.variant}.json", head,
                         {"q0": q_critical(s.alpha, s.beta), "certificates": rows})]
    if args.format == "csv" and rows:
        fields = list(rows[0])
        paths.append(_write_csv(out / f"sharpness-{s.variant}.csv", head, fields, [[r[f] for f in fields] for r in rows]))
    return paths


def drift_table(alpha: float, L: int) -> list[tuple[int, float, float]]:
    Ls, x = [], 10
    while x < L:
        Ls.append(x)
        x *= 10
    Ls.append(L)
    return [(n, d, d / n ** (1 - alpha)) for n in Ls for d in [rounding_drift_demo(alpha, n)]]


def cmd_drift(args) -> list[Path]:
    rows = drift_table(args.alpha, args.L)
    out = _out_dir(args)
    head = _header(args)
    if args.format == "csv":
        return [_write_csv(out / "drift.csv", head, ["L", "logDrift", "ratio"], rows)]
    return [_write_json(out / "drift.json", head, {"rows": [{"L": a, "logDrift": b, "ratio": c} for a, b, c in rows]})]


HANDLERS = {
    "schedule": cmd_schedule,
    "build": cmd_build,
    "decay": cmd_decay,
    "regularity": cmd_regularity,
    "energy": cmd_energy,
    "sharpness": cmd_sharpness,
    "drift": cmd_drift,
}


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        for path in HANDLERS[args.command](args):
            print(path)
    except SalemError as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exitCode": exc.exit_code, "command": args.command}
        for attr in ("level", "seed"):
            if getattr(exc, attr, None) is not None:
                record[attr] = getattr(exc, attr)
        print(json.dumps(record), file=sys.stderr)
        return exc.exit_code
    return 0


def main() -> None:
    sys.exit(run())
