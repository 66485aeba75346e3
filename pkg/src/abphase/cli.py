"""Command line front door.

    abphase run <config.toml> [--seed N] [--out-dir DIR] [--shots N] [--quiet]
    abphase sweep <config.toml> --axis NAME --values v1,v2,... [...]
    abphase validate <config.toml>

Reports are JSON with sorted keys and no timestamp, so identical inputs give
byte-identical files.  All artifacts are written to temporary names and
renamed only after the whole scenario succeeded.  Failures print one JSON
error record on stderr and exit nonzero without touching the output
directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .config import ConfigError
from .phase_extraction import RegimeError
from .scenarios import (SCHEMA_VERSION, SWEEP_SCHEMA_VERSION, ScenarioError, build_config,
                        build_grid, convergence_sweep, jsonable, load_scenario, resolved_summary,
                        run_scenario_settings, sweep_csv, _needs_grid)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_REGIME = 3


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_atomic(files: dict, out_dir: Path) -> list:
    """Write ``{name: text}`` into ``out_dir`` via temp files and ``os.replace``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=out_dir)
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [str(final) for _, final in staged]


def _error_record(exc: BaseException) -> tuple:
    if isinstance(exc, ScenarioError):
        code = EXIT_CONFIG
    elif isinstance(exc, RegimeError):
        code = EXIT_REGIME
    elif isinstance(exc, (ConfigError, ValueError, FileNotFoundError)):
        code = EXIT_CONFIG
    else:
        code = EXIT_INTERNAL
    rec = {"schema": "abphase.error/1", "status": "error", "error_type": type(exc).__name__,
           "message": str(exc), "exit_code": code}
    if getattr(exc, "line", None) is not None:
        rec["line"] = exc.line
        rec["column"] = exc.column
    return rec, code


def _report(scn, result, kind=None, schema=SCHEMA_VERSION) -> dict:
    return {
        "schema": schema, "version": __version__, "status": "ok",
        "kind": kind or scn.kind, "seed": scn.seed, "config_sha1": scn.source_sha1,
        "input": scn.raw, "resolved": resolved_summary(scn.settings), "result": result,
    }


def cmd_run(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    scn = load_scenario(text, seed=args.seed, shots=args.shots)
    result, csv = run_scenario_settings(scn)
    out = scn.settings["output"]
    files = {out["report"]: dumps(_report(scn, result))}
    if csv is not None:
        files[out["series"]] = csv
    written = write_atomic(files, Path(args.out_dir))
    if not args.quiet:
        print(json.dumps({"status": "ok", "kind": scn.kind, "outputs": written}, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    scn = load_scenario(text, seed=args.seed, shots=args.shots)
    target = scn.settings["sweep"]["target"] if scn.kind == "ConvergenceSweep" else scn.kind
    values = [float(v) if any(c in v for c in ".eE") else int(v) for v in args.values.split(",") if v]
    result = convergence_sweep(scn.settings, target, args.axis, values)
    files = {"sweep.json": dumps(_report(scn, result, "ConvergenceSweep", SWEEP_SCHEMA_VERSION)),
             "sweep.csv": sweep_csv(result)}
    written = write_atomic(files, Path(args.out_dir))
    if not args.quiet:
        print(json.dumps({"status": "ok", "monotone": result["monotone"], "outputs": written},
                         sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    scn = load_scenario(text, seed=args.seed, shots=args.shots)
    build_config(scn.settings)
    if scn.kind != "ConvergenceSweep" and _needs_grid(scn.kind, scn.settings):
        build_grid(scn.settings, scn.kind)
    if not args.quiet:
        print(json.dumps({"status": "valid", "kind": scn.kind, "config_sha1": scn.source_sha1},
                         sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="abphase", description="Local Aharonov-Bohm phase scenarios")
    p.add_argument("--version", action="version", version=f"abphase {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("config", help="scenario TOML file")
        sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        sp.add_argument("--out-dir", default=".", help="directory for report/series files")
        sp.add_argument("--shots", type=int, default=None, help="override tomography shots")
        sp.add_argument("--quiet", action="store_true", help="print nothing on success")

    common(sub.add_parser("run", help="run a scenario"))
    sw = sub.add_parser("sweep", help="convergence sweep along one discretization axis")
    common(sw)
    sw.add_argument("--axis", required=True)
    sw.add_argument("--values", required=True, help="comma-separated, monotone")
    common(sub.add_parser("validate", help="parse and validate a scenario without running it"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate}[args.verb]
    try:
        return handler(args)
    except Exception as exc:
        rec, code = _error_record(exc)
        print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
