"""Coupling constructions linking the jump process to its fluid limit.

Three samplers built on Poisson thinning against the constant envelope
from ``lipschitz_bound``:

* :func:`simulate_auxiliary` -- independent spins with time-dependent
  rates lam_i(x_t), mu_i(x_t) read off a precomputed trajectory; started
  either exactly at x0 or from independent Binomial(N, x0_i) counts.
* :func:`simulate_coupled` -- the joint evolution of the density-profile
  process m and the auxiliary process m-hat sharing synchronized clocks
  for the common part of their rates; every asynchronous move is a
  *discrepancy* and increases the possible separation by exactly 1/N.
* :func:`initialization_coupling` -- two full spin systems (exact and
  binomial starts) where agreeing sites share one clock and disagreeing
  sites merge at their first flip, so per-type disagreement counts never
  increase.

The discrepancy counter D(t) dominates the separation:
||m_t - m-hat_t||_inf <= D(t)/N holds exactly, event by event, and
:func:`validate_coupling_inequality` re-checks it on recorded runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import models
from ._kernels import thinning_aux, thinning_coupled
from .simulate import (
    MAX_EVENTS,
    JumpPath,
    ResourceError,
    RngStream,
    grid_counts,
)

__all__ = [
    "AuxiliaryPath",
    "CoupledRun",
    "InitializationCoupling",
    "simulate_auxiliary",
    "binomial_marginal_test",
    "simulate_coupled",
    "coupling_inequality_holds",
    "validate_coupling_inequality",
    "validate_lockstep",
    "initialization_coupling",
    "discrepancy_summary",
    "summarize_discrepancy_counts",
]


@dataclass
class AuxiliaryPath(JumpPath):
    """Path of the independent-spin process driven by trajectory rates."""

    init_mode: str = "exact"
    target_x0: Optional[np.ndarray] = None


@dataclass
class CoupledRun:
    """Joint realization of (m, m-hat) with its discrepancy record.

    ``delta_after[j]`` is the integer separation vector
    (m-hat counts - m counts) right after the j-th discrepancy; between
    discrepancies the two processes move in lockstep and the separation
    is constant.
    """

    m_path: JumpPath
    m_hat_path: JumpPath
    disc_times: np.ndarray
    disc_types: np.ndarray
    disc_which: np.ndarray  # 0: only m moved, 1: only m-hat moved
    disc_dirs: np.ndarray
    delta_after: np.ndarray  # (D, k) int64

    @property
    def N(self) -> int:
        return self.m_path.N

    @property
    def T(self) -> float:
        return self.m_path.T

    @property
    def k(self) -> int:
        return self.m_path.k

    @property
    def discrepancy_count(self) -> int:
        return int(self.disc_times.shape[0])

    def discrepancy_count_at(self, t: float) -> int:
        return int(np.searchsorted(self.disc_times, t, side="right"))

    def separation_at(self, t: float) -> np.ndarray:
        """Separation vector m-hat - m (density units) at time t."""
        j = self.discrepancy_count_at(t)
        if j == 0:
            return np.zeros(self.k)
        return self.delta_after[j - 1] / self.N

    def write_files(self, directory, stem: str = "run") -> List[Path]:
        """Store as <stem>.m.bin, <stem>.mhat.bin and <stem>.disc.csv."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        m_file = directory / f"{stem}.m.bin"
        h_file = directory / f"{stem}.mhat.bin"
        d_file = directory / f"{stem}.disc.csv"
        self.m_path.to_binary(m_file)
        self.m_hat_path.to_binary(h_file)
        with open(d_file, "w", newline="") as fh:
            fh.write("tau_index,time,type,which_process,delta_l1_after\n")
            for j in range(self.discrepancy_count):
                which = "m" if self.disc_which[j] == 0 else "mhat"
                l1 = int(np.abs(self.delta_after[j]).sum())
                fh.write(f"{j + 1},{float(self.disc_times[j])!r},"
                         f"{int(self.disc_types[j])},{which},{l1}\n")
        return [m_file, h_file, d_file]


@dataclass
class InitializationCoupling:
    """Coupled exact-start / binomial-start spin systems.

    ``disagree_counts[j]`` is the per-type number of sites where the two
    configurations differ after the j-th flip event (row 0: initially).
    """

    times: np.ndarray
    disagree_counts: np.ndarray  # (events+1, k) int64
    magnetization_exact: np.ndarray
    magnetization_binomial: np.ndarray


def _rate_tables(spec, traj, T: float, max_dt: float) -> Tuple[float, np.ndarray, np.ndarray]:
    if traj.T < T - 1e-9:
        raise ValueError(f"trajectory horizon {traj.T} shorter than requested T={T}")
    dt, states = traj.uniform_grid()
    if dt > max_dt + 1e-12:
        raise ValueError(
            f"trajectory grid step {dt} too coarse; integrate with sample_every <= {max_dt}"
        )
    if isinstance(spec, models.MeanFieldSpec):
        e = states @ spec.alpha + spec.a
        lam_tab = np.exp(e)
        mu_tab = np.exp(-e)
    else:
        lam_tab = np.broadcast_to(spec.lam, states.shape).copy()
        mu_tab = np.broadcast_to(spec.mu, states.shape).copy()
    return dt, np.ascontiguousarray(lam_tab), np.ascontiguousarray(mu_tab)


def simulate_auxiliary(spec, traj, x0, N: int, T: float, rng: RngStream,
                       init: str = "exact", max_events: int = MAX_EVENTS) -> AuxiliaryPath:
    """Independent-spin birth-death chain with rates read along ``traj``.

    Up rate of type i is (N - U_i) * lam_i(x_t), down rate U_i * mu_i(x_t);
    events are produced by thinning against the envelope N*d, so the
    accepted-event law is exact.  ``init='binomial'`` starts from
    independent Binomial(N, x0_i) counts instead of exactly at x0.
    """
    if init not in ("exact", "binomial"):
        raise ValueError(f"init must be 'exact' or 'binomial', got {init!r}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.k,):
        raise ValueError(f"x0 must have shape ({spec.k},)")
    dt, lam_tab, mu_tab = _rate_tables(spec, traj, T, max_dt=1e-3)
    gen = rng.generator()
    if init == "exact":
        counts0 = grid_counts(x0, N)
    else:
        if np.any(x0 < 0) or np.any(x0 > 1):
            raise ValueError("binomial init needs x0 in [0,1]^k")
        counts0 = gen.binomial(N, x0).astype(np.int64)
    start = counts0 / N
    _, d = models.lipschitz_bound(spec)
    envelope = N * d
    if envelope <= 0.0:
        times = np.empty(0)
        types = np.empty(0, dtype=np.int16)
        dirs = np.empty(0, dtype=np.int8)
    else:
        times, types, dirs, status = thinning_aux(
            N, counts0.copy(), float(T), dt, lam_tab, mu_tab, envelope, gen, max_events
        )
        if status == 1:
            raise ResourceError(f"event log exceeded {max_events} events")
        if status == 2:
            raise RuntimeError(
                "thinning envelope violated: rate bound from lipschitz_bound is not sound"
            )
    return AuxiliaryPath(
        x0=start, N=N, T=float(T),
        times=times.copy(), types=types.astype(np.int16), dirs=dirs.astype(np.int8),
        seed=rng.seed64, init_mode=init, target_x0=x0,
    )


def binomial_marginal_test(samples, N: int, p: float) -> Tuple[float, float]:
    """Standardized moments of integer samples against Binomial(N, p).

    Returns (mean_z, var_ratio): the deviation of the sample mean from
    N*p in units of sqrt(N p (1-p) / R), and the ratio of the sample
    variance to N p (1-p).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 200:
        raise ValueError(f"need at least 200 samples, got {samples.size}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0,1), got {p}")
    R = samples.size
    var = N * p * (1.0 - p)
    mean_z = (samples.mean() - N * p) / np.sqrt(var / R)
    var_ratio = samples.var(ddof=1) / var
    return float(mean_z), float(var_ratio)


def simulate_coupled(spec, traj, x0, N: int, T: float, rng: RngStream,
                     max_events: int = MAX_EVENTS) -> CoupledRun:
    """Couple the density-profile process with the auxiliary process.

    Both start at x0.  Synchronized +-i channels fire at the pointwise
    minimum of the two rates and move both processes; the excess rates
    move exactly one of them and are recorded as discrepancies.  With
    zero separation and equal rates this reduces to the basic coupling,
    so the event lists coincide until the first discrepancy.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.k,):
        raise ValueError(f"x0 must have shape ({spec.k},)")
    dt, lam_tab, mu_tab = _rate_tables(spec, traj, T, max_dt=1e-3)
    counts0 = grid_counts(x0, N)
    start = counts0 / N
    _, d = models.lipschitz_bound(spec)
    envelope = 2.0 * N * d
    gen = rng.generator()
    if envelope <= 0.0:
        empty_t = np.empty(0)
        empty_y = np.empty(0, dtype=np.int16)
        empty_d = np.empty(0, dtype=np.int8)
        out = (empty_t, empty_y, empty_d, empty_t, empty_y, empty_d,
               empty_t, empty_y, empty_d, empty_d, np.empty((0, spec.k), dtype=np.int64), 0)
    else:
        mode, alpha, a, lam0, mu0 = spec.kernel_args()
        out = thinning_coupled(
            mode, alpha, a, lam0, mu0, N, counts0.copy(), counts0.copy(),
            float(T), dt, lam_tab, mu_tab, envelope, gen, max_events,
        )
    (mt, my, md, ht, hy, hd, dt_, dy, dw, dd, dsep, status) = out
    if status == 1:
        raise ResourceError(f"event log exceeded {max_events} events")
    if status == 2:
        raise RuntimeError(
            "thinning envelope violated: rate bound from lipschitz_bound is not sound"
        )
    seed = rng.seed64
    m_path = JumpPath(x0=start, N=N, T=float(T), times=mt.copy(),
                      types=my.astype(np.int16), dirs=md.astype(np.int8), seed=seed)
    h_path = JumpPath(x0=start.copy(), N=N, T=float(T), times=ht.copy(),
                      types=hy.astype(np.int16), dirs=hd.astype(np.int8), seed=seed)
    return CoupledRun(
        m_path=m_path, m_hat_path=h_path,
        disc_times=dt_.copy(), disc_types=dy.astype(np.int16),
        disc_which=dw.astype(np.int8), disc_dirs=dd.astype(np.int8),
        delta_after=dsep.copy(),
    )


def coupling_inequality_holds(m_path: JumpPath, m_hat_path: JumpPath,
                              disc_times: np.ndarray) -> bool:
    """||m_t - m-hat_t||_inf <= D(t)/N at every event time, exactly.

    Integer-count arithmetic throughout; also usable on runs reloaded
    from their stored event logs plus the discrepancy CSV.
    """
    ts = np.union1d(m_path.times, m_hat_path.times)
    cm = m_path.count_path()
    ch = m_hat_path.count_path()
    im = np.searchsorted(m_path.times, ts, side="right")
    ih = np.searchsorted(m_hat_path.times, ts, side="right")
    sep = np.abs(ch[ih] - cm[im]).max(axis=1) if ts.size else np.empty(0, dtype=np.int64)
    dcount = np.searchsorted(disc_times, ts, side="right")
    return bool(np.all(sep <= dcount))


def validate_coupling_inequality(run: CoupledRun) -> bool:
    """Exact per-run check of ||m_t - m-hat_t||_inf <= D(t)/N at every event time."""
    return coupling_inequality_holds(run.m_path, run.m_hat_path, run.disc_times)


def validate_lockstep(run: CoupledRun) -> bool:
    """Between discrepancies the two event lists agree event for event.

    Removing the private (discrepancy) events from each list must leave
    identical synchronized event sequences.
    """
    m_private = run.disc_times[run.disc_which == 0]
    h_private = run.disc_times[run.disc_which == 1]
    m_keep = ~np.isin(run.m_path.times, m_private)
    h_keep = ~np.isin(run.m_hat_path.times, h_private)
    return (
        np.array_equal(run.m_path.times[m_keep], run.m_hat_path.times[h_keep])
        and np.array_equal(run.m_path.types[m_keep], run.m_hat_path.types[h_keep])
        and np.array_equal(run.m_path.dirs[m_keep], run.m_hat_path.dirs[h_keep])
    )


def initialization_coupling(spec, traj, x0, N: int, T: float,
                            rng: RngStream) -> InitializationCoupling:
    """Couple the exact-count start with the binomial start, site by site.

    Both spin systems flip with the same time-dependent rates along the
    trajectory.  Sites where the configurations agree share one clock and
    flip together; a disagreeing site merges at its first flip and never
    separates again, so the per-type disagreement count is nonincreasing.
    Intended for small N; the loop is plain Python.
    """
    if N < 1 or N > 10_000:
        raise ResourceError("initialization coupling is a full-spin check; use N <= 10000")
    dt, lam_tab, mu_tab = _rate_tables(spec, traj, T, max_dt=1e-3)
    counts0 = grid_counts(x0, N)
    x0 = counts0 / N
    k = spec.k
    gen = rng.generator()

    eta_exact = np.full((k, N), -1, dtype=np.int8)
    for i in range(k):
        order = gen.permutation(N)
        eta_exact[i, order[: counts0[i]]] = 1
    eta_binom = np.where(gen.random((k, N)) < x0[:, None], 1, -1).astype(np.int8)

    _, d = models.lipschitz_bound(spec)
    envelope = N * d
    times = [0.0]
    disagree = [np.count_nonzero(eta_exact != eta_binom, axis=1)]
    n_grid = lam_tab.shape[0]
    t = 0.0
    while envelope > 0.0:
        t += -np.log1p(-gen.random()) / envelope
        if t > T:
            break
        pos = min(t / dt, n_grid - 1 - 1e-12)
        idx = int(pos)
        frac = pos - idx
        lam = lam_tab[idx] + frac * (lam_tab[idx + 1] - lam_tab[idx])
        mu = mu_tab[idx] + frac * (mu_tab[idx + 1] - mu_tab[idx])
        agree = eta_exact == eta_binom
        # per type: agreeing-down sites flip up together, agreeing-up flip
        # down together, disagreeing sites carry both clocks
        n_agree_dn = np.count_nonzero(agree & (eta_exact == -1), axis=1)
        n_agree_up = np.count_nonzero(agree & (eta_exact == 1), axis=1)
        n_dis = N - n_agree_dn - n_agree_up
        ch_rates = np.stack([
            n_agree_dn * lam,
            n_agree_up * mu,
            n_dis * lam,
            n_dis * mu,
        ])  # (4, k)
        total = ch_rates.sum()
        if total > envelope * (1.0 + 1e-9):
            raise RuntimeError("thinning envelope violated in initialization coupling")
        u = gen.random() * envelope
        if u >= total:
            continue
        flat = np.cumsum(ch_rates.reshape(-1))
        ch = int(np.searchsorted(flat, u, side="right"))
        cls, typ = divmod(ch, k)
        if cls == 0:
            sites = np.flatnonzero(agree[typ] & (eta_exact[typ] == -1))
            site = sites[min(int(gen.random() * sites.size), sites.size - 1)]
            eta_exact[typ, site] = 1
            eta_binom[typ, site] = 1
        elif cls == 1:
            sites = np.flatnonzero(agree[typ] & (eta_exact[typ] == 1))
            site = sites[min(int(gen.random() * sites.size), sites.size - 1)]
            eta_exact[typ, site] = -1
            eta_binom[typ, site] = -1
        else:
            sites = np.flatnonzero(~agree[typ])
            site = sites[min(int(gen.random() * sites.size), sites.size - 1)]
            if cls == 2:  # the down member flips up; both end at +1
                eta_exact[typ, site] = 1
                eta_binom[typ, site] = 1
            else:  # the up member flips down; both end at -1
                eta_exact[typ, site] = -1
                eta_binom[typ, site] = -1
        times.append(t)
        disagree.append(np.count_nonzero(eta_exact != eta_binom, axis=1))
    return InitializationCoupling(
        times=np.asarray(times),
        disagree_counts=np.asarray(disagree, dtype=np.int64),
        magnetization_exact=(eta_exact == 1).sum(axis=1) / N,
        magnetization_binomial=(eta_binom == 1).sum(axis=1) / N,
    )


def summarize_discrepancy_counts(by_n: dict, epsilon: float) -> List[dict]:
    """Per-N rows from a mapping N -> list of total discrepancy counts."""
    if not 0.0 < epsilon:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    rows = []
    for N in sorted(by_n):
        counts = np.asarray(by_n[N], dtype=float)
        threshold = float(N ** (0.5 + epsilon))
        rows.append({
            "N": int(N),
            "runs": int(counts.size),
            "mean_D": float(counts.mean()),
            "max_D": float(counts.max()),
            "threshold": threshold,
            "exceed_fraction": float(np.mean(counts >= threshold)),
        })
    return rows


def discrepancy_summary(runs: List[CoupledRun], epsilon: float) -> List[dict]:
    """Per-N statistics of total discrepancy counts.

    Rows (one per N, ascending): total runs, mean and max of D(N T), the
    threshold N^(epsilon + 1/2), and the fraction of runs at or above it.
    """
    if not runs:
        raise ValueError("discrepancy_summary needs at least one run")
    by_n: dict = {}
    for run in runs:
        by_n.setdefault(run.N, []).append(run.discrepancy_count)
    return summarize_discrepancy_counts(by_n, epsilon)
