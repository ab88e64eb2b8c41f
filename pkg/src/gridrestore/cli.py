"""Command-line front end.

Exit codes: 0 ok, 1 infeasible or not converged, 2 usage or input error,
3 backend failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .backend import BACKENDS, BackendError
from .builder import write_lp
from .ccg import InfeasibleInstance, ccg_solve
from .compact import build_model, compact_from_builder
from .decision import FirstStageDecision
from .fixtures import load_fixture
from .grid import Scenario
from .instance import InstanceError
from .oracle import OracleRefused, enumerate_oracle
from .report import build_report, series_csv, summary, write_artifacts
from .validate import validate_schedule

logger = logging.getLogger("gridrestore")

OK, FAILED, USAGE, BACKEND = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridrestore", description="Robust restoration scheduling.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--tol", type=float, default=1e-3, help="relative gap to stop at")
        sp.add_argument("--max-iter", type=int, default=30)
        sp.add_argument("--bits", type=int, default=None, help="binary expansion bits per deviation")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--backend", default="highs", choices=sorted(BACKENDS))

    s = sub.add_parser("solve", help="robust schedule, report and trace")
    s.add_argument("instance", help="instance file or shipped name (desk, anchors, res-island)")
    solver_flags(s)
    s.add_argument("--out", type=Path, default=Path("out"))

    v = sub.add_parser("validate", help="re-simulate a schedule under a scenario")
    v.add_argument("instance")
    v.add_argument("schedule", type=Path, help="report.json or a bare schedule mapping")
    v.add_argument("--scenario", default=None,
                   help="scenario file, or 'zero' for the forecast; defaults to the report's worst case")

    o = sub.add_parser("enumerate-oracle", help="brute-force min-max on a tiny instance")
    o.add_argument("instance")
    o.add_argument("--out", type=Path, default=None)

    e = sub.add_parser("export-model", help="write the model as LP text and compact blocks")
    e.add_argument("instance")
    e.add_argument("--out", type=Path, default=Path("model"))

    r = sub.add_parser("report", help="plot-ready series and summary from a report")
    r.add_argument("report", type=Path)
    r.add_argument("--out", type=Path, default=None)
    return p


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})")


def _instance(name: str):
    try:
        return load_fixture(name)
    except FileNotFoundError:
        raise UsageError(f"{name}: no such instance file or shipped fixture")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{name}: invalid JSON ({exc})")


def cmd_solve(args) -> int:
    inst = _instance(args.instance)
    if args.tol <= 0 or args.max_iter < 1 or (args.bits is not None and args.bits < 0):
        raise UsageError("--tol must be positive, --max-iter at least 1 and --bits non-negative")
    result = ccg_solve(inst, tolerance=args.tol, max_iter=args.max_iter, bits=args.bits,
                       backend=args.backend, seed=args.seed)
    doc = build_report(inst, result)
    write_artifacts(args.out, doc, result.timings)
    sys.stdout.write(summary(doc))
    return OK if result.converged and doc["validated"]["feasible"] else FAILED


def cmd_validate(args) -> int:
    inst = _instance(args.instance)
    doc = _read_json(args.schedule)
    try:
        schedule = FirstStageDecision.from_dict(doc.get("schedule", doc))
        if args.scenario is None:
            scenario = Scenario.from_dict(doc["worst_scenario"]) if "worst_scenario" in doc else None
        elif args.scenario == "zero":
            scenario = None
        else:
            scenario = Scenario.from_dict(_read_json(Path(args.scenario)))
    except (ValueError, TypeError, AttributeError) as exc:
        raise UsageError(f"{args.schedule}: not a schedule ({exc})")
    check = validate_schedule(inst, schedule, scenario)
    out = {"feasible": check.feasible, "objective": check.objective,
           "violations": [str(v) for v in check.violations]}
    sys.stdout.write(json.dumps(out, sort_keys=True, indent=2) + "\n")
    return OK if check.feasible else FAILED


def cmd_oracle(args) -> int:
    inst = _instance(args.instance)
    res = enumerate_oracle(inst)
    out = {"objective": res.objective, "evaluated": res.evaluated, "repair_routes": res.repair_routes,
           "operating_routes": res.operating_routes, "remote_close": res.remote_close,
           "worst_scenario": res.worst.to_dict() if res.worst else None}
    text = json.dumps(out, sort_keys=True, indent=2) + "\n"
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "oracle.json").write_text(text)
    sys.stdout.write(text)
    return OK


def cmd_export(args) -> int:
    inst = _instance(args.instance)
    b, ncg, clusters, links = build_model(inst)
    model = compact_from_builder(b, ncg, clusters, links)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "model.lp", "w") as fh:
        write_lp(b, fh)
    arrays = {"b": model.b, "d": model.d, "f": model.f, "g": model.g, "u": model.u}
    for key in ("A", "D", "F", "G", "H", "U"):
        m = getattr(model, key).tocoo()
        arrays[f"{key}_shape"] = np.array(m.shape)
        arrays[f"{key}_rows"], arrays[f"{key}_cols"], arrays[f"{key}_vals"] = m.row, m.col, m.data
    np.savez_compressed(args.out / "blocks.npz", **arrays)
    meta = {"sizes": model.sizes, "reclassified": model.reclassified,
            "x": [list(n) for n in model.x_names()], "y": [list(n) for n in model.y_names()],
            "sigma": [list(n) for n in model.s_names()]}
    (args.out / "blocks.json").write_text(json.dumps(meta, indent=1) + "\n")
    sys.stdout.write(json.dumps(model.sizes, sort_keys=True) + "\n")
    return OK


def cmd_report(args) -> int:
    doc = _read_json(args.report)
    if "series" not in doc:
        raise UsageError(f"{args.report}: not a schedule report")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "series.csv").write_text(series_csv(doc))
        (args.out / "summary.txt").write_text(summary(doc))
    sys.stdout.write(series_csv(doc))
    return OK


COMMANDS = {"solve": cmd_solve, "validate": cmd_validate, "enumerate-oracle": cmd_oracle,
            "export-model": cmd_export, "report": cmd_report}


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InstanceError) as exc:
        return _fail("usage", str(exc), USAGE)
    except InfeasibleInstance as exc:
        return _fail("infeasible", str(exc), FAILED)
    except OracleRefused as exc:
        return _fail("refused", str(exc), FAILED)
    except BackendError as exc:
        return _fail("backend", str(exc), BACKEND)


if __name__ == "__main__":
    sys.exit(main())
