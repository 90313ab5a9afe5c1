"""Command-line front door.

Subcommands
-----------
ode        integrate the limiting ODE, write trajectory.csv (t, x1..xk)
simulate   one density-profile realization at the largest N in the grid
converge   pathwise-convergence ensemble -> ensemble.csv + summary.json
bifurcate  critical-coupling scan -> bifurcation.csv + summary.json
couple     coupled-process ensembles -> discrepancy.csv + summary.json
validate   re-check manifests and the coupling inequality on stored runs

All output-producing commands also write manifest.json (config hash,
per-file sha256 checksums, wall clock).  Exit codes: 0 success,
1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import dynamics, experiments, models, simulate
from .experiments import ExperimentConfig

__all__ = ["main", "cli_main"]


def _load_schema(name: str) -> dict:
    with resources.files("spindrift").joinpath(f"schemas/{name}").open() as fh:
        return json.load(fh)


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise models.ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise models.ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, _load_schema("config.schema.json"))
    except jsonschema.ValidationError as exc:
        raise models.ConfigurationError(f"config {path} fails the schema: {exc.message}") from exc
    return ExperimentConfig.from_dict(doc)


def _out_dir(args, config: ExperimentConfig) -> Path:
    out = args.out or config.output_dir
    if out is None:
        raise models.ConfigurationError("no output directory: pass --out or set output_dir")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_ode(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    start = time.perf_counter()
    traj = dynamics.integrate(config.model, config.x0, config.T,
                              h=config.ode_h, sample_every=config.sample_every)
    csv_path = out / "trajectory.csv"
    header = "t," + ",".join(f"x{i + 1}" for i in range(traj.k))
    with open(csv_path, "w", newline="") as fh:
        fh.write(header + "\n")
        for t, state in zip(traj.times, traj.states):
            fh.write(f"{float(t)!r}," + ",".join(repr(float(v)) for v in state) + "\n")
    experiments.write_manifest(out, config, [csv_path], time.perf_counter() - start)
    return 0


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    start = time.perf_counter()
    n = max(config.N_grid)
    seed = simulate.mix64(config.master_seed, n, 0)
    x0n, _ = simulate.snap_to_grid(config.x0, n)
    path = simulate.simulate_density_profile(config.model, x0n, n, config.T,
                                             simulate.RngStream(seed))
    bin_path = out / "events.bin"
    csv_path = out / "events.csv"
    path.to_binary(bin_path)
    path.to_csv(csv_path)
    experiments.write_manifest(out, config, [bin_path, csv_path],
                               time.perf_counter() - start,
                               extra={"N": n, "seed": seed, "events": path.event_count})
    return 0


def _cmd_converge(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    start = time.perf_counter()
    summary = experiments.run_convergence_study(config, out_dir=out)
    csv_path = out / "ensemble.csv"
    experiments.write_ensemble_csv(summary.rows, csv_path)
    partial = out / "ensemble.partial.csv"
    if partial.exists():
        partial.unlink()
    doc = {
        "study": "converge",
        "epsilon": summary.epsilon,
        "per_N": {str(n): stats for n, stats in summary.per_n.items()},
        "fit": summary.fit,
    }
    json_path = out / "summary.json"
    experiments.write_json(doc, json_path)
    experiments.write_manifest(out, config, [csv_path, json_path],
                               time.perf_counter() - start)
    return 0


def _cmd_bifurcate(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    start = time.perf_counter()
    study = experiments.run_bifurcation_study(config)
    csv_path = out / "bifurcation.csv"
    experiments.write_bifurcation_csv(study.grid, csv_path)
    doc = {
        "study": "bifurcate",
        "J_critical": study.result.J_critical,
        "type": study.result.type,
        "imag_at_crossing": study.result.imag_at_crossing,
        "bracket": list(study.result.bracket),
        "dispersion": study.dispersion,
    }
    json_path = out / "summary.json"
    experiments.write_json(doc, json_path)
    experiments.write_manifest(out, config, [csv_path, json_path],
                               time.perf_counter() - start)
    return 0


def _cmd_couple(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    start = time.perf_counter()
    study = experiments.run_coupling_study(config, out_dir=out)
    csv_path = out / "discrepancy.csv"
    experiments.write_discrepancy_csv(study.rows, csv_path)
    doc = {"study": "couple", "epsilon": config.epsilon, "per_N": study.summary_rows}
    json_path = out / "summary.json"
    experiments.write_json(doc, json_path)
    files = [csv_path, json_path]
    files.extend(sorted((out / "coupled").glob("*")))
    experiments.write_manifest(out, config, files, time.perf_counter() - start)
    return 0


def _cmd_validate(args) -> int:
    problems = experiments.validate_output_dir(args.directory)
    for p in problems:
        print(f"FAIL: {p}", file=sys.stderr)
    if problems:
        return 1
    print(f"ok: {args.directory}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spindrift",
        description="simulate type-dependent spin-flip systems and analyse their fluid limits",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("ode", _cmd_ode),
        ("simulate", _cmd_simulate),
        ("converge", _cmd_converge),
        ("bifurcate", _cmd_bifurcate),
        ("couple", _cmd_couple),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory")
        p.set_defaults(handler=fn)
    v = sub.add_parser("validate")
    v.add_argument("directory", help="run directory to re-check")
    v.set_defaults(handler=_cmd_validate)
    return parser


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    try:
        return args.handler(args)
    except models.ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
