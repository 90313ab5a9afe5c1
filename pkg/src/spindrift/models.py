"""Rate models for k-type mean-field spin-flip systems.

A model assigns to every density vector x in R^k a pair of positive
per-type rates: lam_i(x), the activation rate of type i, and mu_i(x),
the deactivation rate.  The mean-field family is

    lam_i(x) = exp(sum_j alpha[j, i] * x_j + a_i),   mu_i(x) = 1 / lam_i(x)

with alpha[j, i] the influence of type j on type i and a_i an external
field.  From any rate pair the clamped birth/death fields are

    f_i(x) = (1 - x_i) lam_i(x)   on [0, 1], frozen one-sided outside,
    g_i(x) = x_i mu_i(x)          on [0, 1], zero below 0, frozen above 1,

and the drift V = f - g.  Everything downstream (the jump simulators,
the limiting ODE, the stability analysis) consumes f, g and V through
the functions in this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "ConfigurationError",
    "CyclicParams",
    "MeanFieldSpec",
    "TabulatedSpec",
    "build_mean_field",
    "build_cyclic",
    "eval_f_g",
    "velocity",
    "lipschitz_bound",
    "spec_to_dict",
    "spec_from_dict",
    "spec_to_json",
    "spec_from_json",
]

# exp() overflows near 709; anything beyond this bound is a sign of a
# misconfigured model, not a physical regime.
_MAX_EXPONENT = 700.0


class ConfigurationError(ValueError):
    """Raised when model parameters are dimensionally or numerically invalid."""


def _as_float_array(x, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise ConfigurationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CyclicParams:
    """Parameters of the cyclic-interaction model on k >= 3 types.

    Each type i is influenced only by its counter-clockwise neighbour
    c(i) = (i mod k) + 1 (1-based), with sign ``signs[i]`` and common
    coupling strength J > 0.
    """

    k: int
    signs: Tuple[int, ...]
    J: float

    def __post_init__(self):
        if self.k < 3:
            raise ConfigurationError(f"cyclic model needs k >= 3, got k={self.k}")
        signs = tuple(int(s) for s in self.signs)
        if len(signs) != self.k:
            raise ConfigurationError(f"expected {self.k} signs, got {len(signs)}")
        if any(s not in (-1, 1) for s in signs):
            raise ConfigurationError("signs must be +1 or -1")
        if not self.J > 0:
            raise ConfigurationError(f"coupling J must be positive, got {self.J}")
        object.__setattr__(self, "signs", signs)

    @property
    def sign_product(self) -> int:
        prod = 1
        for s in self.signs:
            prod *= s
        return prod


@dataclass(frozen=True)
class MeanFieldSpec:
    """Exponential mean-field rate model lam_i = exp(sum_j alpha[j,i] x_j + a_i).

    Immutable after construction; all evaluation methods are pure, so a
    single instance is safely shared across worker threads.
    """

    alpha: np.ndarray
    a: np.ndarray
    cyclic: Optional[CyclicParams] = field(default=None, compare=False)

    def __post_init__(self):
        alpha = _as_float_array(self.alpha, "alpha", 2)
        a = _as_float_array(self.a, "a", 1)
        k = a.shape[0]
        if k < 1:
            raise ConfigurationError("model dimension k must be >= 1")
        if alpha.shape != (k, k):
            raise ConfigurationError(
                f"alpha must be {k}x{k} to match a of length {k}, got {alpha.shape}"
            )
        # Worst-case |exponent| over [0,1]^k, per type.
        bound = np.abs(alpha).sum(axis=0) + np.abs(a)
        if bound.max() > _MAX_EXPONENT:
            raise ConfigurationError(
                f"rate exponent bound {bound.max():.3g} exceeds {_MAX_EXPONENT}; "
                "rates would overflow double precision"
            )
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "a", a)

    @property
    def k(self) -> int:
        return self.a.shape[0]

    def exponent(self, x: np.ndarray) -> np.ndarray:
        """sum_j alpha[j,i] x_j + a_i, the log of lam."""
        return np.asarray(x, dtype=float) @ self.alpha + self.a

    def rates(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """(lam(x), mu(x)) for an arbitrary point x in R^k."""
        e = self.exponent(x)
        return np.exp(e), np.exp(-e)

    def rate_sups(self) -> Tuple[np.ndarray, np.ndarray]:
        """Componentwise suprema of lam and mu over the unit cube [0,1]^k."""
        pos = np.clip(self.alpha, 0.0, None).sum(axis=0)
        neg = np.clip(-self.alpha, 0.0, None).sum(axis=0)
        return np.exp(pos + self.a), np.exp(neg - self.a)

    def kernel_args(self):
        """Dispatch tuple (mode, alpha, a, lam0, mu0) consumed by the jit kernels."""
        z = np.zeros(self.k)
        return 0, self.alpha, self.a, z, z


@dataclass(frozen=True)
class TabulatedSpec:
    """Constant per-type rates supplied directly as tables.

    The degenerate member of the rate family: lam and mu do not depend
    on the state.  Used for calibration runs (all-zero rates give an
    eventless path; rates matched to a reference trajectory give a
    discrepancy-free coupling).
    """

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        lam = _as_float_array(self.lam, "lam", 1)
        mu = _as_float_array(self.mu, "mu", 1)
        if lam.shape != mu.shape:
            raise ConfigurationError("lam and mu must have equal length")
        if lam.shape[0] < 1:
            raise ConfigurationError("model dimension k must be >= 1")
        if np.any(lam < 0) or np.any(mu < 0):
            raise ConfigurationError("tabulated rates must be nonnegative")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @property
    def k(self) -> int:
        return self.lam.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        # Constant rates have zero interaction matrix; lets the Jacobian
        # and serialization code treat both spec kinds uniformly.
        z = np.zeros((self.k, self.k))
        z.flags.writeable = False
        return z

    def rates(self, x) -> Tuple[np.ndarray, np.ndarray]:
        return self.lam, self.mu

    def rate_sups(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.lam, self.mu

    def kernel_args(self):
        z = np.zeros((self.k, self.k))
        return 1, z, np.zeros(self.k), self.lam, self.mu


def build_mean_field(alpha, a) -> MeanFieldSpec:
    """Mean-field model from an interaction matrix and field vector."""
    return MeanFieldSpec(alpha=np.asarray(alpha, dtype=float), a=np.asarray(a, dtype=float))


def build_cyclic(params: CyclicParams) -> MeanFieldSpec:
    """Cyclic-interaction model: alpha[c(i), i] = s_i J, a_i = -s_i J / 2.

    The field choice -s_i J / 2 centers each exponent so that
    lam_i(x) = exp(s_i J (x_{c(i)} - 1/2)); the symmetric point
    (1/2, ..., 1/2) is then a fixed point of the drift for every J.
    """
    k = params.k
    alpha = np.zeros((k, k))
    a = np.empty(k)
    for i in range(k):
        ci = (i + 1) % k  # counter-clockwise successor, 0-based
        alpha[ci, i] = params.signs[i] * params.J
        a[i] = -params.signs[i] * params.J / 2.0
    return MeanFieldSpec(alpha=alpha, a=a, cyclic=params)


def eval_f_g(spec, x) -> Tuple[np.ndarray, np.ndarray]:
    """Clamped birth/death fields (f, g) at an arbitrary point x in R^k.

    Interior: f_i = (1 - x_i) lam_i(x), g_i = x_i mu_i(x).  For x_i <= 0
    the birth rate freezes at lam_i evaluated with x_i replaced by 0 and
    the death rate vanishes; for x_i >= 1 symmetrically.  Total function,
    componentwise nonnegative.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.k,):
        raise ValueError(f"x must have shape ({spec.k},), got {x.shape}")
    lam, mu = spec.rates(x)
    f = (1.0 - x) * lam
    g = x * mu
    low = x <= 0.0
    high = x >= 1.0
    if low.any():
        for i in np.flatnonzero(low):
            xi = x.copy()
            xi[i] = 0.0
            f[i] = spec.rates(xi)[0][i]
        g[low] = 0.0
    if high.any():
        for i in np.flatnonzero(high):
            xi = x.copy()
            xi[i] = 1.0
            g[i] = spec.rates(xi)[1][i]
        f[high] = 0.0
    return f, g


def velocity(spec, x) -> np.ndarray:
    """Drift field V(x) = f(x) - g(x) of the density-profile process."""
    f, g = eval_f_g(spec, x)
    return f - g


def lipschitz_bound(spec) -> Tuple[float, float]:
    """(K, d): a Lipschitz constant for the rates and the flip-rate envelope.

    K bounds the Lipschitz constant of lam and mu over [0,1]^k (gradient
    norm times the rate supremum, maximised over types).  d is the
    uniform envelope sum_i (sup lam_i + sup mu_i); N*d dominates the total
    jump rate of every aggregated process built from this model, which is
    what the thinning samplers propose against.
    """
    sup_lam, sup_mu = spec.rate_sups()
    col_norms = np.linalg.norm(np.asarray(spec.alpha, dtype=float), axis=0)
    K = float(np.max(col_norms * np.maximum(sup_lam, sup_mu), initial=0.0))
    d = float(np.sum(sup_lam) + np.sum(sup_mu))
    return K, d


# -- JSON round-trip ---------------------------------------------------------
#
# Three document forms:
#   {"k": int, "alpha": [[...]], "a": [...]}
#   {"cyclic": {"k": int, "signs": [...], "J": real}}
#   {"tabulated": {"lam": [...], "mu": [...]}}


def spec_to_dict(spec) -> dict:
    if isinstance(spec, MeanFieldSpec):
        if spec.cyclic is not None:
            c = spec.cyclic
            return {"cyclic": {"k": c.k, "signs": list(c.signs), "J": c.J}}
        return {"k": spec.k, "alpha": spec.alpha.tolist(), "a": spec.a.tolist()}
    if isinstance(spec, TabulatedSpec):
        return {"tabulated": {"lam": spec.lam.tolist(), "mu": spec.mu.tolist()}}
    raise ConfigurationError(f"cannot serialize spec of type {type(spec).__name__}")


def spec_from_dict(doc: dict):
    if not isinstance(doc, dict):
        raise ConfigurationError("model document must be a JSON object")
    if "cyclic" in doc:
        c = doc["cyclic"]
        try:
            params = CyclicParams(k=int(c["k"]), signs=tuple(c["signs"]), J=float(c["J"]))
        except KeyError as exc:
            raise ConfigurationError(f"cyclic model document missing field {exc}") from exc
        return build_cyclic(params)
    if "tabulated" in doc:
        t = doc["tabulated"]
        try:
            return TabulatedSpec(lam=np.asarray(t["lam"], float), mu=np.asarray(t["mu"], float))
        except KeyError as exc:
            raise ConfigurationError(f"tabulated model document missing field {exc}") from exc
    if "alpha" in doc and "a" in doc:
        spec = build_mean_field(doc["alpha"], doc["a"])
        if "k" in doc and int(doc["k"]) != spec.k:
            raise ConfigurationError(
                f"declared k={doc['k']} does not match alpha/a dimension {spec.k}"
            )
        return spec
    raise ConfigurationError(
        "model document must contain 'cyclic', 'tabulated', or 'alpha'+'a'"
    )


def spec_to_json(spec) -> str:
    return json.dumps(spec_to_dict(spec), sort_keys=True)


def spec_from_json(text: str):
    return spec_from_dict(json.loads(text))
