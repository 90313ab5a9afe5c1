"""Exact stochastic simulation of density-profile and spin-flip processes.

The density-profile process lives on the grid {0, 1/N, ..., 1}^k and
jumps one coordinate by +-1/N at rates N*f_i(x) and N*g_i(x).  The
sampler works internally in *graphical time* (unscaled rates f, g) and
converts recorded times to density-profile time by a single division by
N, so the time-rescaling identity between the two clocks holds bitwise,
not just in law.

Randomness comes from :class:`RngStream`: a (master_seed, stream_index)
pair that always reproduces the same numpy Generator, regardless of how
many replicas run concurrently.  Per-replica seeds in ensembles are
derived with :func:`mix64`.

Event logs serialize to a little-endian binary format
(header u32 k | u64 N | f64 T | u64 seed | k*f64 x0, then per event
f64 time | u16 type | i8 direction) and to CSV with columns
time,type,direction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

import numpy as np

from . import models
from ._kernels import gillespie_graphical, spin_full

__all__ = [
    "ResourceError",
    "RngStream",
    "mix64",
    "JumpPath",
    "SpinConfig",
    "snap_to_grid",
    "grid_counts",
    "simulate_density_profile",
    "simulate_spin_system",
    "sup_distance",
    "rescaling_consistency",
]

MAX_EVENTS = 100_000_000
FULL_SPIN_MAX_N = 10_000

_EVENT_DTYPE = np.dtype([("time", "<f8"), ("type", "<u2"), ("dir", "<i1")])
_HEADER = struct.Struct("<IQdQ")  # k, N, T, seed

_MASK64 = 0xFFFFFFFFFFFFFFFF


class ResourceError(RuntimeError):
    """A run would exceed a memory or size guard."""


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(*parts: int) -> int:
    """Combine integers into one 64-bit seed.

    h_0 = 0 and h_{j+1} = splitmix64(h_j XOR part_j), returning h_n.
    Used to derive per-replica seeds from (master_seed, N, replica, tag)
    so that extending an ensemble never changes existing replicas.
    """
    h = 0
    for p in parts:
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return h


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream: (master_seed, stream_index).

    ``generator()`` returns a fresh PCG64 Generator seeded through
    SeedSequence(entropy=master_seed, spawn_key=(stream_index,)); equal
    fields give bitwise-equal streams on every call and in every thread.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(ss))

    @property
    def seed64(self) -> int:
        """Single 64-bit tag identifying this stream in logs and headers."""
        return mix64(self.master_seed, self.stream_index)


@dataclass
class JumpPath:
    """One realization of a density-profile process.

    Events are (time, type, direction) with 1-based types and directions
    +-1; times are strictly increasing in (0, T].  States reconstructed
    after any prefix of events stay on the grid (1/N)Z^k inside [0,1]^k.
    """

    x0: np.ndarray
    N: int
    T: float
    times: np.ndarray
    types: np.ndarray
    dirs: np.ndarray
    seed: int = 0

    @property
    def k(self) -> int:
        return self.x0.shape[0]

    @property
    def event_count(self) -> int:
        return int(self.times.shape[0])

    def counts0(self) -> np.ndarray:
        return np.rint(self.x0 * self.N).astype(np.int64)

    def count_path(self) -> np.ndarray:
        """(event_count+1, k) integer states: row j is the state after j events."""
        deltas = np.zeros((self.event_count + 1, self.k), dtype=np.int64)
        if self.event_count:
            deltas[np.arange(1, self.event_count + 1), self.types - 1] = self.dirs
        return self.counts0()[None, :] + np.cumsum(deltas, axis=0)

    def state_at(self, t: float) -> np.ndarray:
        """Density vector at time t (state after the last event <= t)."""
        n_before = int(np.searchsorted(self.times, t, side="right"))
        counts = self.counts0()
        if n_before:
            idx = self.types[:n_before] - 1
            np.add.at(counts, idx, self.dirs[:n_before])
        return counts / self.N

    def final_state(self) -> np.ndarray:
        return self.state_at(self.T)

    # -- serialization --------------------------------------------------

    def to_binary(self, path) -> None:
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(self.k, self.N, self.T, self.seed))
            fh.write(np.ascontiguousarray(self.x0, dtype="<f8").tobytes())
            events = np.empty(self.event_count, dtype=_EVENT_DTYPE)
            events["time"] = self.times
            events["type"] = self.types.astype(np.uint16)
            events["dir"] = self.dirs
            fh.write(events.tobytes())

    @classmethod
    def from_binary(cls, path) -> "JumpPath":
        raw = Path(path).read_bytes()
        k, N, T, seed = _HEADER.unpack_from(raw, 0)
        off = _HEADER.size
        x0 = np.frombuffer(raw, dtype="<f8", count=k, offset=off).copy()
        off += 8 * k
        events = np.frombuffer(raw, dtype=_EVENT_DTYPE, offset=off)
        return cls(
            x0=x0,
            N=int(N),
            T=float(T),
            times=events["time"].astype(np.float64),
            types=events["type"].astype(np.int16),
            dirs=events["dir"].astype(np.int8),
            seed=int(seed),
        )

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            fh.write("time,type,direction\n")
            for t, y, d in zip(self.times, self.types, self.dirs):
                fh.write(f"{float(t)!r},{int(y)},{int(d)}\n")


@dataclass
class SpinConfig:
    """Explicit k x N array of +-1 spins."""

    values: np.ndarray

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def magnetization(self) -> np.ndarray:
        """Per-type fraction of +1 spins."""
        return (self.values == 1).sum(axis=1) / self.N


def grid_counts(x0, N: int) -> np.ndarray:
    """Integer up-counts for a grid point x0; rejects off-grid input."""
    x0 = np.asarray(x0, dtype=float)
    scaled = x0 * N
    counts = np.rint(scaled)
    if np.max(np.abs(scaled - counts)) > 1e-6:
        raise ValueError(f"x0={x0} is not on the grid (1/{N})Z^k")
    if np.any(counts < 0) or np.any(counts > N):
        raise ValueError(f"x0={x0} outside [0,1]^k")
    return counts.astype(np.int64)


def snap_to_grid(x0, N: int) -> Tuple[np.ndarray, float]:
    """Round x0 to the nearest grid point; returns (snapped, max abs shift)."""
    x0 = np.asarray(x0, dtype=float)
    counts = np.clip(np.rint(x0 * N), 0, N)
    snapped = counts / N
    return snapped, float(np.max(np.abs(snapped - x0)))


def _check_sim_args(spec, x0, N, T):
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.k,):
        raise ValueError(f"x0 must have shape ({spec.k},)")
    return grid_counts(x0, N)


def simulate_density_profile(spec, x0, N: int, T: float, rng: RngStream,
                             max_events: int = MAX_EVENTS) -> JumpPath:
    """Exact simulation of the density-profile process up to time T.

    From state x the waiting time is exponential with rate
    N * sum_i (f_i + g_i) and the jump channel is chosen with probability
    proportional to its rate; zero total rate freezes the path.
    """
    counts = _check_sim_args(spec, x0, N, T)
    x0 = counts / N
    mode, alpha, a, lam0, mu0 = spec.kernel_args()
    gen = rng.generator()
    horizon = float(N) * T
    times_g, types, dirs, status = gillespie_graphical(
        mode, alpha, a, lam0, mu0, N, counts.copy(), horizon, gen, max_events
    )
    if status == 1:
        raise ResourceError(
            f"event log exceeded {max_events} events; raise max_events or shorten T"
        )
    return JumpPath(
        x0=x0, N=N, T=T,
        times=times_g / float(N),
        types=types.astype(np.int16),
        dirs=dirs.astype(np.int8),
        seed=rng.seed64,
    )


def simulate_spin_system(spec, x0, N: int, T: float, rng: RngStream,
                         mode: str = "aggregated",
                         max_events: int = MAX_EVENTS) -> JumpPath:
    """Microscopic spin-flip simulation; returns the magnetization path.

    ``aggregated`` simulates the magnetization birth-death chain directly
    and is, by shared implementation, event-for-event identical to
    simulate_density_profile under the same stream.  ``full`` keeps the
    explicit k x N spin array (uniformly shuffled start with the exact
    per-type counts), flips individual spins at rates lam_i(m) / mu_i(m),
    and records the induced magnetization jumps.

    The Hamiltonian flip-rate convention exp(-Delta H) is reachable from
    this density form by the reparametrization alpha -> 2*alpha,
    a_i -> a_i - sum_j alpha[j,i].
    """
    if mode == "aggregated":
        return simulate_density_profile(spec, x0, N, T, rng, max_events=max_events)
    if mode != "full":
        raise ValueError(f"mode must be 'aggregated' or 'full', got {mode!r}")
    if N > FULL_SPIN_MAX_N:
        raise ResourceError(f"full spin arrays limited to N <= {FULL_SPIN_MAX_N}, got N={N}")
    counts = _check_sim_args(spec, x0, N, T)
    x0 = counts / N
    gen = rng.generator()
    spins = np.full((spec.k, N), -1, dtype=np.int8)
    for i in range(spec.k):
        order = gen.permutation(N)
        spins[i, order[: counts[i]]] = 1
    kmode, alpha, a, lam0, mu0 = spec.kernel_args()
    times, types, dirs, status = spin_full(
        kmode, alpha, a, lam0, mu0, N, spins, counts.copy(), float(T), gen, max_events
    )
    if status == 1:
        raise ResourceError(
            f"event log exceeded {max_events} events; raise max_events or shorten T"
        )
    return JumpPath(
        x0=x0, N=N, T=float(T),
        times=times.copy(), types=types.astype(np.int16), dirs=dirs.astype(np.int8),
        seed=rng.seed64,
    )


def _sup_distances(path: JumpPath, traj) -> Tuple[float, float]:
    if traj.T < path.T - 1e-9:
        raise ValueError(f"trajectory horizon {traj.T} shorter than path horizon {path.T}")
    if traj.grid_spacing() > 1e-2 + 1e-12:
        raise ValueError("trajectory sampling coarser than 1e-2; integrate with a finer sample_every")
    tt = traj.times[traj.times <= path.T + 1e-12]
    ts = np.union1d(tt, path.times)
    counts = path.count_path()
    idx = np.searchsorted(path.times, ts, side="right")
    m = counts[idx] / path.N
    x = np.column_stack([
        np.interp(ts, traj.times, traj.states[:, i]) for i in range(path.k)
    ])
    diff = m - x
    eu = float(np.sqrt((diff * diff).sum(axis=1)).max())
    mx = float(np.abs(diff).max())
    return eu, mx


def sup_distance(path: JumpPath, traj, norm: str = "euclidean") -> float:
    """Supremum of |m_t - x_t| over the union of event and sample times.

    The path is piecewise constant (state after the most recent event),
    the trajectory linearly interpolated between its samples.
    """
    eu, mx = _sup_distances(path, traj)
    if norm == "euclidean":
        return eu
    if norm == "max":
        return mx
    raise ValueError(f"norm must be 'euclidean' or 'max', got {norm!r}")


def rescaling_consistency(spec, x0, N: int, T: float, rng: RngStream,
                          max_events: int = MAX_EVENTS) -> bool:
    """Check the clock identity between graphical and density-profile time.

    Runs the sampler with unscaled rates f, g to horizon N*T under the
    same stream, divides all event times by N, and compares against
    simulate_density_profile event for event.  The shared implementation
    makes this an exact (bitwise) identity.
    """
    path = simulate_density_profile(spec, x0, N, T, rng, max_events=max_events)
    counts = _check_sim_args(spec, x0, N, T)
    mode, alpha, a, lam0, mu0 = spec.kernel_args()
    gen = rng.generator()
    times_g, types_g, dirs_g, status = gillespie_graphical(
        mode, alpha, a, lam0, mu0, N, counts.copy(), float(N) * T, gen, max_events
    )
    if status != 0:
        raise ResourceError("unscaled comparison run exceeded the event budget")
    return (
        np.array_equal(path.times, times_g / float(N))
        and np.array_equal(path.types, types_g)
        and np.array_equal(path.dirs, dirs_g)
    )
