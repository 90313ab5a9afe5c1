"""Experiment orchestration: configs, studies, persistence, manifests.

A study is driven by an :class:`ExperimentConfig` (parsed from JSON) and
produces CSV/JSON outputs plus a run manifest with per-file checksums.
Per-replica seeds derive from the master seed through :func:`mix64`:

    converge   seed = mix64(master_seed, N, replica)
    couple     seed = mix64(master_seed, N, replica, 3)
    bifurcate  seed = mix64(master_seed, N, replica, 2, side)

so extending an ensemble with more replicas never changes existing ones.
Replicas are scheduled on a bounded thread pool (the jit kernels release
the GIL); the ``THREADS`` environment variable overrides the pool size
and affects speed only, never results.  Interrupted ensembles resume
from a partial CSV of completed (N, replica) rows.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, coupling, dynamics, models, simulate

__all__ = [
    "ExperimentConfig",
    "EnsembleRow",
    "EnsembleSummary",
    "BifurcationStudy",
    "CouplingStudy",
    "run_convergence_study",
    "run_bifurcation_study",
    "run_coupling_study",
    "write_manifest",
    "validate_output_dir",
    "file_sha256",
]

_STUDY_BIFURCATE = 2
_STUDY_COUPLE = 3

ENSEMBLE_HEADER = "N,replica,seed,sup_dist_euclid,sup_dist_max,events"
BIFURCATION_HEADER = "J,max_real_part,imag_part"
DISCREPANCY_HEADER = "N,replica,D_total,exceeded"


@dataclass
class ExperimentConfig:
    """Knobs shared by all studies; see the JSON schema in schemas/."""

    model: object
    x0: np.ndarray
    T: float = 5.0
    N_grid: Tuple[int, ...] = (100, 400, 1600, 6400)
    replicas: int = 32
    epsilon: float = 0.1
    master_seed: int = 0
    output_dir: Optional[str] = None
    j_range: Optional[Tuple[float, float]] = None
    resolution: float = 1e-3
    ode_h: float = 1e-3
    sample_every: float = 1e-2
    dispersion_delta: float = 0.25

    def __post_init__(self):
        if isinstance(self.model, models.CyclicParams):
            self.model = models.build_cyclic(self.model)
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (self.model.k,):
            raise models.ConfigurationError(
                f"x0 has length {self.x0.shape}, model dimension is {self.model.k}"
            )
        if np.any(self.x0 <= 0.0) or np.any(self.x0 >= 1.0):
            raise models.ConfigurationError("x0 must lie strictly inside (0,1)^k")
        self.N_grid = tuple(int(n) for n in self.N_grid)
        if not self.N_grid:
            raise models.ConfigurationError("N_grid must be nonempty")
        if any(n < 1 for n in self.N_grid) or any(
            b <= a for a, b in zip(self.N_grid, self.N_grid[1:])
        ):
            raise models.ConfigurationError("N_grid must be strictly increasing positive integers")
        if self.replicas < 1:
            raise models.ConfigurationError("replicas must be >= 1")
        if not 0.0 < self.epsilon < 0.5:
            raise models.ConfigurationError("epsilon must lie in (0, 1/2)")
        if not self.T > 0:
            raise models.ConfigurationError("T must be positive")
        self.master_seed = int(self.master_seed)
        if self.j_range is not None:
            lo, hi = (float(v) for v in self.j_range)
            if not lo < hi:
                raise models.ConfigurationError("j_range must satisfy low < high")
            self.j_range = (lo, hi)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise models.ConfigurationError("config must be a JSON object")
        try:
            spec = models.spec_from_dict(doc["model"])
            kwargs = dict(
                model=spec,
                x0=doc["x0"],
                T=float(doc.get("T", 5.0)),
                N_grid=doc.get("N_grid", (100, 400, 1600, 6400)),
                replicas=int(doc.get("replicas", 32)),
                epsilon=float(doc.get("epsilon", 0.1)),
                master_seed=int(doc.get("master_seed", 0)),
                output_dir=doc.get("output_dir"),
                resolution=float(doc.get("resolution", 1e-3)),
                dispersion_delta=float(doc.get("dispersion_delta", 0.25)),
            )
        except KeyError as exc:
            raise models.ConfigurationError(f"config is missing required field {exc}") from exc
        if "j_range" in doc and doc["j_range"] is not None:
            kwargs["j_range"] = tuple(doc["j_range"])
        ode = doc.get("ode", {})
        kwargs["ode_h"] = float(ode.get("h", 1e-3))
        kwargs["sample_every"] = float(ode.get("sample_every", 1e-2))
        return cls(**kwargs)

    def to_dict(self) -> dict:
        doc = {
            "model": models.spec_to_dict(self.model),
            "x0": self.x0.tolist(),
            "T": self.T,
            "N_grid": list(self.N_grid),
            "replicas": self.replicas,
            "epsilon": self.epsilon,
            "master_seed": self.master_seed,
            "resolution": self.resolution,
            "dispersion_delta": self.dispersion_delta,
            "ode": {"h": self.ode_h, "sample_every": self.sample_every},
        }
        if self.output_dir is not None:
            doc["output_dir"] = str(self.output_dir)
        if self.j_range is not None:
            doc["j_range"] = list(self.j_range)
        return doc


@dataclass
class EnsembleRow:
    N: int
    replica: int
    seed: int
    sup_dist_euclid: float
    sup_dist_max: float
    events: int


@dataclass
class EnsembleSummary:
    rows: List[EnsembleRow]
    per_n: Dict[int, dict]
    fit: Optional[dict]  # {"slope", "intercept", "stderr"} of log median vs log N
    epsilon: float

    def median_distances(self) -> Dict[int, float]:
        return {n: stats["median_euclid"] for n, stats in self.per_n.items()}


def _worker_count(n_jobs: int) -> int:
    env = os.environ.get("THREADS")
    if env:
        workers = max(1, int(env))
    else:
        workers = min(8, os.cpu_count() or 1)
    return max(1, min(workers, n_jobs))


def _run_pool(jobs: Sequence, work) -> list:
    """Run ``work(job)`` over a bounded pool; results in job order."""
    workers = _worker_count(len(jobs))
    if workers == 1:
        return [work(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(work, job) for job in jobs]
        return [f.result() for f in futures]


def _ols_loglog(n_values: Sequence[int], medians: Sequence[float]) -> dict:
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.log(np.asarray(medians, dtype=float))
    n = x.size
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(n - 2, 1)
    s2 = float(resid @ resid) / dof
    stderr = float(np.sqrt(s2 / ((x - x.mean()) @ (x - x.mean()))))
    return {"slope": float(slope), "intercept": float(intercept), "stderr": stderr}


def _partial_path(out_dir: Path) -> Path:
    return out_dir / "ensemble.partial.csv"


def _load_partial(out_dir: Optional[Path]) -> Dict[Tuple[int, int], EnsembleRow]:
    done: Dict[Tuple[int, int], EnsembleRow] = {}
    if out_dir is None:
        return done
    partial = _partial_path(out_dir)
    if not partial.exists():
        return done
    for line in partial.read_text().splitlines()[1:]:
        if not line.strip():
            continue
        n, r, seed, eu, mx, ev = line.split(",")
        row = EnsembleRow(int(n), int(r), int(seed), float(eu), float(mx), int(ev))
        done[(row.N, row.replica)] = row
    return done


def _row_line(row: EnsembleRow) -> str:
    return (f"{row.N},{row.replica},{row.seed},"
            f"{row.sup_dist_euclid!r},{row.sup_dist_max!r},{row.events}")


def run_convergence_study(config: ExperimentConfig,
                          out_dir: Optional[Path] = None) -> EnsembleSummary:
    """Simulate the (N, replica) ensemble and summarize pathwise distances.

    Every replica is compared in both norms against one shared trajectory
    started from the exact config x0; per-N medians feed the log-log
    slope fit (only when the grid has >= 3 points) and the exceedance
    fraction of the N^(-1/2+epsilon) threshold.
    """
    spec = config.model
    traj = dynamics.integrate(spec, config.x0, config.T,
                              h=config.ode_h, sample_every=config.sample_every)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    done = _load_partial(out_dir)
    jobs = [(n, r) for n in config.N_grid for r in range(config.replicas)]
    pending = [j for j in jobs if j not in done]

    def work(job):
        n, r = job
        seed = simulate.mix64(config.master_seed, n, r)
        x0n, _ = simulate.snap_to_grid(config.x0, n)
        path = simulate.simulate_density_profile(spec, x0n, n, config.T, simulate.RngStream(seed))
        eu, mx = simulate._sup_distances(path, traj)
        return EnsembleRow(N=n, replica=r, seed=seed, sup_dist_euclid=eu,
                           sup_dist_max=mx, events=path.event_count)

    new_rows = _run_pool(pending, work)
    if out_dir is not None and new_rows:
        partial = _partial_path(out_dir)
        fresh = not partial.exists()
        with open(partial, "a") as fh:
            if fresh:
                fh.write(ENSEMBLE_HEADER + "\n")
            for row in new_rows:
                fh.write(_row_line(row) + "\n")
    rows = list(done.values()) + new_rows
    rows.sort(key=lambda r: (r.N, r.replica))

    per_n: Dict[int, dict] = {}
    for n in config.N_grid:
        dists = np.asarray([r.sup_dist_euclid for r in rows if r.N == n])
        threshold = float(n ** (-0.5 + config.epsilon))
        per_n[n] = {
            "median_euclid": float(np.median(dists)),
            "median_max": float(np.median([r.sup_dist_max for r in rows if r.N == n])),
            "threshold": threshold,
            "exceed_fraction": float(np.mean(dists > threshold)),
        }
    fit = None
    if len(config.N_grid) >= 3:
        fit = _ols_loglog(config.N_grid, [per_n[n]["median_euclid"] for n in config.N_grid])
    return EnsembleSummary(rows=rows, per_n=per_n, fit=fit, epsilon=config.epsilon)


@dataclass
class BifurcationStudy:
    result: dynamics.BifurcationResult
    grid: List[Tuple[float, float, float]]  # (J, max_real_part, imag_part)
    dispersion: Dict[str, dict]


def run_bifurcation_study(config: ExperimentConfig) -> BifurcationStudy:
    """Locate the critical coupling, tabulate the leading eigenvalue over
    the scanned range, and probe the transition with one stochastic
    ensemble just below and just above the critical value.
    """
    spec = config.model
    if not isinstance(spec, models.MeanFieldSpec) or spec.cyclic is None:
        raise models.ConfigurationError("bifurcation study requires a cyclic model")
    if config.j_range is None:
        raise models.ConfigurationError("bifurcation study requires j_range in the config")
    params = spec.cyclic
    scan = dynamics.bifurcation_scan(params.k, params.signs, config.j_range,
                                     resolution=config.resolution)
    lo, hi = config.j_range
    step = max(config.resolution, (hi - lo) / 2000.0)
    grid = []
    j = lo
    while j < hi + 0.5 * step:
        w = dynamics._leading_eigenvalue_at_center(params.k, params.signs, min(j, hi))
        grid.append((min(j, hi), float(w.real), float(w.imag)))
        j += step

    n_probe = max(config.N_grid)
    dispersion: Dict[str, dict] = {}
    for side_idx, (side, j_side) in enumerate((
        ("below", max(scan.J_critical - config.dispersion_delta, 0.5 * scan.J_critical)),
        ("above", scan.J_critical + config.dispersion_delta),
    )):
        side_spec = models.build_cyclic(
            models.CyclicParams(k=params.k, signs=params.signs, J=j_side)
        )
        x0n, _ = simulate.snap_to_grid(config.x0, n_probe)

        def work(replica, side_spec=side_spec, side_idx=side_idx, x0n=x0n):
            seed = simulate.mix64(config.master_seed, n_probe, replica,
                                  _STUDY_BIFURCATE, side_idx)
            path = simulate.simulate_density_profile(
                side_spec, x0n, n_probe, config.T, simulate.RngStream(seed)
            )
            return path.final_state()

        terminals = np.asarray(_run_pool(list(range(config.replicas)), work))
        dispersion[side] = {
            "J": float(j_side),
            "N": n_probe,
            "replicas": config.replicas,
            "terminal_std_max": float(terminals.std(axis=0, ddof=0).max()),
            "terminal_mean": terminals.mean(axis=0).tolist(),
        }
    return BifurcationStudy(result=scan, grid=grid, dispersion=dispersion)


@dataclass
class CouplingStudy:
    rows: List[dict]  # per (N, replica): D_total, exceeded
    summary_rows: List[dict]


def run_coupling_study(config: ExperimentConfig,
                       out_dir: Optional[Path] = None) -> CouplingStudy:
    """Coupled (m, m-hat) ensembles across N_grid with discrepancy stats.

    Every produced run is re-checked against the exact coupling
    inequality before being counted; with ``out_dir`` the per-run event
    logs and discrepancy CSVs are stored under ``coupled/``.
    """
    spec = config.model
    traj = dynamics.integrate(spec, config.x0, config.T,
                              h=min(config.ode_h, 1e-3), sample_every=1e-3)
    if out_dir is not None:
        out_dir = Path(out_dir)
        (out_dir / "coupled").mkdir(parents=True, exist_ok=True)
    rows: List[dict] = []
    by_n: Dict[int, List[int]] = {}
    jobs = [(n, r) for n in config.N_grid for r in range(config.replicas)]

    def work(job):
        n, r = job
        seed = simulate.mix64(config.master_seed, n, r, _STUDY_COUPLE)
        x0n, _ = simulate.snap_to_grid(config.x0, n)
        run = coupling.simulate_coupled(spec, traj, x0n, n, config.T,
                                        simulate.RngStream(seed))
        if not coupling.validate_coupling_inequality(run):
            raise RuntimeError(f"coupling inequality violated for N={n}, replica={r}")
        return run

    runs = _run_pool(jobs, work)
    for (n, r), run in zip(jobs, runs):
        threshold = n ** (0.5 + config.epsilon)
        d_total = run.discrepancy_count
        rows.append({
            "N": n, "replica": r, "D_total": d_total,
            "exceeded": int(d_total >= threshold),
        })
        by_n.setdefault(n, []).append(d_total)
        if out_dir is not None:
            run.write_files(out_dir / "coupled", stem=f"N{n:06d}_r{r:03d}")
    summary_rows = coupling.summarize_discrepancy_counts(by_n, config.epsilon)
    return CouplingStudy(rows=rows, summary_rows=summary_rows)


# -- persistence --------------------------------------------------------------


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, config: ExperimentConfig, files: List[Path],
                   wall_clock_s: float, extra: Optional[dict] = None) -> Path:
    """Write manifest.json: config, checksums, and the only timestamps."""
    out_dir = Path(out_dir)
    config_doc = config.to_dict()
    canonical = json.dumps(config_doc, sort_keys=True).encode()
    doc = {
        "tool": "spindrift",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "wall_clock_s": wall_clock_s,
        "master_seed": config.master_seed,
        "config": config_doc,
        "config_sha256": hashlib.sha256(canonical).hexdigest(),
        "x0_rounding": {
            str(n): simulate.snap_to_grid(config.x0, n)[1] for n in config.N_grid
        },
        "rate_interpolation_error_bound": _interp_error_bound(config),
        "files": {
            str(p.relative_to(out_dir).as_posix()): file_sha256(p) for p in files
        },
    }
    if extra:
        doc.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def _interp_error_bound(config: ExperimentConfig) -> float:
    # rate tables are linearly interpolated on the ODE grid; the error is
    # at most grid_step * K * sup-rate with K the rate Lipschitz constant
    K, d = models.lipschitz_bound(config.model)
    return float(min(config.sample_every, 1e-3) * K * d)


def validate_output_dir(directory) -> List[str]:
    """Re-check a run directory: checksums, then the coupling inequality
    on every stored coupled run.  Returns a list of problems (empty = ok).
    """
    directory = Path(directory)
    problems: List[str] = []
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        return [f"missing manifest.json in {directory}"]
    manifest = json.loads(manifest_path.read_text())
    for rel, digest in manifest.get("files", {}).items():
        p = directory / rel
        if not p.exists():
            problems.append(f"missing file {rel}")
        elif file_sha256(p) != digest:
            problems.append(f"checksum mismatch for {rel}")
    coupled_dir = directory / "coupled"
    if coupled_dir.is_dir():
        stems = sorted({p.name[: -len(".m.bin")] for p in coupled_dir.glob("*.m.bin")})
        for stem in stems:
            try:
                m_path = simulate.JumpPath.from_binary(coupled_dir / f"{stem}.m.bin")
                h_path = simulate.JumpPath.from_binary(coupled_dir / f"{stem}.mhat.bin")
                disc_times = _read_disc_times(coupled_dir / f"{stem}.disc.csv")
            except (OSError, ValueError) as exc:
                problems.append(f"unreadable coupled run {stem}: {exc}")
                continue
            if not coupling.coupling_inequality_holds(m_path, h_path, disc_times):
                problems.append(f"coupling inequality violated in stored run {stem}")
    return problems


def _read_disc_times(path: Path) -> np.ndarray:
    lines = path.read_text().splitlines()
    times = [float(line.split(",")[1]) for line in lines[1:] if line.strip()]
    return np.asarray(times)


# -- CSV/JSON writers used by the CLI -----------------------------------------


def write_ensemble_csv(rows: List[EnsembleRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(ENSEMBLE_HEADER + "\n")
        for row in rows:
            fh.write(_row_line(row) + "\n")


def write_bifurcation_csv(grid: List[Tuple[float, float, float]], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(BIFURCATION_HEADER + "\n")
        for j, re, im in grid:
            fh.write(f"{j!r},{re!r},{im!r}\n")


def write_discrepancy_csv(rows: List[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(DISCREPANCY_HEADER + "\n")
        for row in rows:
            fh.write(f"{row['N']},{row['replica']},{row['D_total']},{row['exceeded']}\n")


def write_json(doc: dict, path: Path) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
