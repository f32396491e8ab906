"""Command-line harness: run, list and validate experiments.

Exit codes: 0 success (all checks passed), 1 one or more checks failed or
an experiment error, 2 config parse/validation error, 3 unknown
experiment, 4 capacity error (system too large for dense storage).
Artifacts land under the config's output_dir, resolved against the
SOSGIBBS_OUTPUT_ROOT environment variable when it is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    UnknownExperimentError,
    parse_config,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_PARSE = 2
EXIT_UNKNOWN_EXPERIMENT = 3
EXIT_CAPACITY = 4

OUTPUT_ROOT_ENV = "SOSGIBBS_OUTPUT_ROOT"


def _output_dir(cfg: ExperimentConfig) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV, ".")
    sub = cfg.get("experiment", "output_dir") or f"out-{cfg.name}"
    return os.path.join(root, sub)


def _fmt(value) -> str:
    """Deterministic CSV cell formatting."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, columns: list[str], rows: list[dict],
              preamble: list[str]):
    with open(path, "w", newline="\n") as fh:
        for line in preamble:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def _json_default(obj):
    import numpy as np
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return str(obj)


def run_experiment(cfg: ExperimentConfig, outdir: str) -> dict:
    """Execute the named experiment and write all artifacts into outdir."""
    from .experiments import REGISTRY
    from . import plotting

    result = REGISTRY[cfg.name](cfg)
    os.makedirs(outdir, exist_ok=True)
    preamble = [
        f"experiment: {cfg.name}",
        f"seed: {cfg.seed}",
    ]
    for ch in result["checks"]:
        if "band" in ch:
            preamble.append(f"band {ch['name']}: {ch['band']}")
    csv_paths = {}
    for name, (columns, rows) in result["tables"].items():
        path = os.path.join(outdir, f"{name}.csv")
        write_csv(path, columns, rows, preamble)
        csv_paths[name] = path

    manifest = {
        "experiment": cfg.name,
        "config": cfg.as_dict(),
        "artifacts": sorted(
            [os.path.basename(p) for p in csv_paths.values()]
            + ["report.json"]),
        "notes": result["notes"],
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True,
                  default=_json_default)
        fh.write("\n")

    passed = all(ch["passed"] for ch in result["checks"])
    report = {
        "experiment": cfg.name,
        "passed": passed,
        "checks": result["checks"],
    }
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")

    figures = plotting.render(cfg.name, result, outdir)
    manifest["artifacts"] += sorted(os.path.basename(f) for f in figures)
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True,
                  default=_json_default)
        fh.write("\n")
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sosgibbs",
        description="Exact dense numerics for factorized quantum Gibbs "
                    "samplers: experiments, figures and pass/fail reports.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="parse and validate a config")
    p_val.add_argument("config")
    sub.add_parser("list", help="list known experiments")
    args = parser.parse_args(argv)

    if args.command == "list":
        for name in EXPERIMENTS:
            print(name)
        return EXIT_OK

    try:
        cfg = parse_config(args.config)
    except UnknownExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_EXPERIMENT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    if args.command == "validate":
        print(f"ok: {cfg.name}")
        return EXIT_OK

    from .spectral import CapacityError
    try:
        report = run_experiment(cfg, _output_dir(cfg))
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    for ch in report["checks"]:
        mark = "PASS" if ch["passed"] else "FAIL"
        print(f"[{mark}] {ch['name']}: {ch['measured']}")
    print("passed" if report["passed"] else "failed")
    return EXIT_OK if report["passed"] else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
