"""Command-line entry point: ``kbeta run`` and ``kbeta validate``.

Exit codes: 0 all invariants passed, 1 invariant violation, 2 invalid
configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, load_config, validate
from .errors import (
    ConfigInvalid,
    InadmissibleInput,
    LegendreFailure,
    NewtonDiverged,
    NonFinite,
    NumericalFailure,
    SlopeUnstable,
)
from .experiments import RUNNERS, Outcome
from .reduction_geometry import save_series

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (NewtonDiverged, NonFinite, LegendreFailure, InadmissibleInput, SlopeUnstable, NumericalFailure)

log = logging.getLogger("kbeta")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kbeta", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kbeta {__version__}")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True, help="experiment INI file")
    run.add_argument("--output", help="output directory (overrides [experiment] output)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for independent cases")
    run.add_argument("--seed", type=int, help="corpus seed (overrides the 'seed' parameter)")
    run.add_argument("--strict", action="store_true", help="treat unstable slope fits as failures")
    run.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    run.add_argument("-v", "--verbose", action="store_true")

    val = sub.add_parser("validate", help="check a config without running numerics")
    val.add_argument("--config", required=True)
    return parser


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_outputs(cfg: ExperimentConfig, outcome: Outcome, out_dir: Path, figures: bool, elapsed: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    data_dir = out_dir / "data"
    data_dir.mkdir(exist_ok=True)
    results = {
        "experiment": cfg.experiment,
        "parameters": dict(sorted(cfg.parameters.items())),
        "records": outcome.records,
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in outcome.checks],
        "status": "pass" if outcome.passed else "fail",
    }
    (out_dir / "results.json").write_text(_dump(results))
    for s in outcome.series:
        save_series(data_dir / f"{s.name}.dat", s.name, s.x, s.y)
    lines = [f"experiment: {cfg.experiment}"]
    lines += outcome.summary
    lines += [f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in outcome.checks]
    lines.append(f"status: {results['status']}")
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    # wall-clock and environment live apart from the deterministic results
    meta = {
        "elapsed_seconds": round(elapsed, 3),
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "python": platform.python_version(),
        "kbeta": __version__,
    }
    (out_dir / "metadata.json").write_text(_dump(meta))
    if figures and outcome.series:
        from .plotting import render

        render(outcome.series, out_dir / "figures")


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
        for note in validate(cfg):
            print(note)
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("valid")
    return EXIT_OK


def cmd_run(args) -> int:
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.parameters["seed"] = str(args.seed)
        validate(cfg)
        if args.jobs < 1:
            raise ConfigInvalid(f"--jobs must be >= 1, got {args.jobs}")
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.output) if args.output else (cfg.output_dir or Path("kbeta-output") / cfg.experiment)
    start = time.perf_counter()
    try:
        outcome = RUNNERS[cfg.experiment](cfg, jobs=args.jobs, strict=args.strict)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure in {cfg.experiment}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_outputs(cfg, outcome, out_dir, not args.no_figures, time.perf_counter() - start)
    print((out_dir / "summary.txt").read_text(), end="")
    return EXIT_OK if outcome.passed else EXIT_INVARIANT


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # bare flags mean "run": kbeta --config x.ini
    if argv and argv[0].startswith("--") and argv[0] not in ("--help", "--version"):
        argv.insert(0, "run")
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args)
    if args.command == "run":
        return cmd_run(args)
    build_parser().print_help()
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
