"""Limiting dynamics: integration, spectra, fixed points, bifurcations.

The fluid limit of the density-profile process is xdot = V(x) with
V = f - g from :mod:`spindrift.models`.  This module integrates that
system with a fixed-step classical RK4 scheme (bit-reproducible runs),
computes the analytic Jacobian and its spectrum, finds fixed points by
Newton iteration, and locates the critical coupling of the cyclic model
by bisection on the leading spectral real part at the symmetric fixed
point (1/2, ..., 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import models
from ._kernels import rk4_path

__all__ = [
    "NumericalInstabilityError",
    "FixedPointError",
    "BracketError",
    "Trajectory",
    "StabilityReport",
    "BifurcationResult",
    "integrate",
    "jacobian",
    "eigenvalues",
    "find_fixed_point",
    "stability_at",
    "bifurcation_scan",
    "orbit_amplitude",
]

STABILITY_TOL = 1e-8


class NumericalInstabilityError(RuntimeError):
    """Integration left the admissible box; the step size is too large."""


class FixedPointError(RuntimeError):
    """Newton iteration failed to locate a fixed point."""


class BracketError(ValueError):
    """The supplied parameter range does not bracket a stability change."""


@dataclass
class Trajectory:
    """Sampled solution of xdot = V(x): strictly increasing times from 0."""

    times: np.ndarray
    states: np.ndarray
    step: float

    @property
    def k(self) -> int:
        return self.states.shape[1]

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t: float) -> np.ndarray:
        """State at time t by linear interpolation between samples."""
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise ValueError(f"t={t} outside trajectory horizon [0, {self.T}]")
        out = np.empty(self.k)
        for i in range(self.k):
            out[i] = np.interp(t, self.times, self.states[:, i])
        return out

    def grid_spacing(self) -> float:
        return float(np.max(np.diff(self.times)))

    def uniform_grid(self) -> Tuple[float, np.ndarray]:
        """(dt, states) when samples are uniformly spaced; raises otherwise."""
        diffs = np.diff(self.times)
        dt = float(diffs[0])
        if np.any(np.abs(diffs - dt) > 1e-9 * max(dt, 1.0)):
            raise ValueError("trajectory samples are not uniformly spaced")
        return dt, self.states


@dataclass
class StabilityReport:
    """Spectrum of the Jacobian at a fixed point and its classification."""

    fixed_point: np.ndarray
    eigenvalues: np.ndarray
    max_real_part: float
    classification: str  # stable | marginal | unstable-real | unstable-complex-pair


@dataclass
class BifurcationResult:
    J_critical: float
    type: str  # pitchfork | hopf
    imag_at_crossing: float
    bracket: Tuple[float, float]


def integrate(spec, x0, T: float, h: float = 1e-3, sample_every: float = 1e-2) -> Trajectory:
    """Integrate xdot = V(x) from x0 over [0, T] with fixed-step RK4.

    States are returned at every multiple of ``sample_every`` plus T.
    Each sampling interval is covered by equal substeps of size <= h, so
    identical arguments always reproduce identical output bytes.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.k,):
        raise models.ConfigurationError(f"x0 must have shape ({spec.k},)")
    if np.any(x0 <= 0.0) or np.any(x0 >= 1.0):
        raise models.ConfigurationError("x0 must lie strictly inside (0,1)^k")
    if not T > 0:
        raise models.ConfigurationError(f"horizon T must be positive, got {T}")
    if not (0 < h <= sample_every):
        raise models.ConfigurationError(f"need 0 < h <= sample_every, got h={h}, sample_every={sample_every}")

    n_full = int(math.floor(T / sample_every + 1e-9))
    times = [j * sample_every for j in range(n_full + 1)]
    if times[-1] < T - 1e-12 * max(T, 1.0):
        times.append(T)
    times = np.asarray(times)
    lengths = np.diff(times)
    substeps = np.maximum(1, np.ceil(lengths / h - 1e-9).astype(np.int64))

    out = np.empty((times.shape[0], spec.k))
    out[0] = x0
    mode, alpha, a, lam0, mu0 = spec.kernel_args()
    status = rk4_path(mode, alpha, a, lam0, mu0, x0, lengths, substeps, out)
    if status != 0:
        raise NumericalInstabilityError(
            f"state left [-1e-6, 1+1e-6]^k during integration (h={h}); reduce the step"
        )
    return Trajectory(times=times, states=out, step=h)


def jacobian(spec, x) -> np.ndarray:
    """Analytic Jacobian of V on the interior branch.

    dV_i/dx_j = alpha[j,i] * ((1-x_i) lam_i + x_i mu_i) - delta_ij (lam_i + mu_i).
    """
    x = np.asarray(x, dtype=float)
    lam, mu = spec.rates(x)
    w = (1.0 - x) * lam + x * mu
    alpha = np.asarray(spec.alpha, dtype=float)
    J = alpha.T * w[:, None]
    J[np.diag_indices_from(J)] -= lam + mu
    return J


def eigenvalues(A) -> np.ndarray:
    """Full complex spectrum of a small dense matrix, sorted by descending
    real part (ties by descending imaginary part)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if A.shape[0] > 64:
        raise ValueError("dense small-matrix spectrum limited to k <= 64")
    w = np.linalg.eigvals(A)
    order = np.lexsort((-w.imag, -w.real))
    return w[order]


def find_fixed_point(spec, guess, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Newton iteration on V with the analytic Jacobian.

    Returns x* with ||V(x*)||_inf <= tol; iterates are projected back
    into (0,1)^k.  Raises FixedPointError after max_iter iterations.
    """
    x = np.asarray(guess, dtype=float).copy()
    if x.shape != (spec.k,):
        raise models.ConfigurationError(f"guess must have shape ({spec.k},)")
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise models.ConfigurationError("guess must lie strictly inside (0,1)^k")
    margin = 1e-9
    for _ in range(max_iter):
        v = models.velocity(spec, x)
        if np.max(np.abs(v)) <= tol:
            return x
        J = jacobian(spec, x)
        try:
            delta = np.linalg.solve(J, -v)
        except np.linalg.LinAlgError as exc:
            raise FixedPointError(f"singular Jacobian at {x}") from exc
        x = np.clip(x + delta, margin, 1.0 - margin)
    raise FixedPointError(
        f"no fixed point found within {max_iter} Newton iterations from the given guess"
    )


def stability_at(spec, x_star) -> StabilityReport:
    """Classify the fixed point x_star by the Jacobian spectrum."""
    x_star = np.asarray(x_star, dtype=float)
    residual = np.max(np.abs(models.velocity(spec, x_star)))
    if residual > 1e-9:
        raise ValueError(f"x_star is not a fixed point: ||V||_inf = {residual:.3g} > 1e-9")
    w = eigenvalues(jacobian(spec, x_star))
    max_re = float(w[0].real)
    if max_re < -STABILITY_TOL:
        cls = "stable"
    elif abs(max_re) <= STABILITY_TOL:
        cls = "marginal"
    elif abs(w[0].imag) > STABILITY_TOL:
        cls = "unstable-complex-pair"
    else:
        cls = "unstable-real"
    return StabilityReport(
        fixed_point=x_star, eigenvalues=w, max_real_part=max_re, classification=cls
    )


def _leading_eigenvalue_at_center(k: int, signs, J: float) -> complex:
    spec = models.build_cyclic(models.CyclicParams(k=k, signs=tuple(signs), J=J))
    half = np.full(k, 0.5)
    return complex(eigenvalues(jacobian(spec, half))[0])


def bifurcation_scan(k: int, signs, j_range: Tuple[float, float],
                     resolution: float = 1e-3) -> BifurcationResult:
    """Bisect the coupling J at which the symmetric fixed point of the
    cyclic model loses stability; classify the crossing by the imaginary
    part of the leading eigenvalue there."""
    lo, hi = float(j_range[0]), float(j_range[1])
    if not (lo < hi):
        raise BracketError(f"need J_low < J_high, got {j_range}")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    re_lo = _leading_eigenvalue_at_center(k, signs, lo).real
    re_hi = _leading_eigenvalue_at_center(k, signs, hi).real
    if re_lo == 0.0 or re_hi == 0.0 or (re_lo > 0) == (re_hi > 0):
        raise BracketError(
            f"max real part does not change sign over J in ({lo}, {hi}): "
            f"{re_lo:.3g} vs {re_hi:.3g}"
        )
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        re_mid = _leading_eigenvalue_at_center(k, signs, mid).real
        if (re_mid > 0) == (re_hi > 0):
            hi = mid
        else:
            lo = mid
    j_c = 0.5 * (lo + hi)
    imag = abs(_leading_eigenvalue_at_center(k, signs, j_c).imag)
    kind = "hopf" if imag > 1e-8 else "pitchfork"
    return BifurcationResult(J_critical=j_c, type=kind, imag_at_crossing=imag, bracket=(lo, hi))


def orbit_amplitude(traj: Trajectory) -> np.ndarray:
    """Per-coordinate max - min over the second half of a trajectory.

    A qualitative indicator only: near zero at a stable fixed point,
    order one on a stable orbit.
    """
    half = traj.times >= 0.5 * traj.T
    seg = traj.states[half]
    return seg.max(axis=0) - seg.min(axis=0)
