"""Stationary series generation and serial-dependence diagnostics.

Simulated series are Gaussian AR(1) drivers pushed through a marginal
quantile transform ``X = Q(Phi(W))``, which fixes the margin while the
rank dependence (lag-1 Kendall's tau) is controlled by the autoregressive
coefficient via ``phi = sin(pi * tau / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal, special

from ._util import as_sample
from .errors import DegenerateSampleError, ParameterError
from .families import Family

__all__ = [
    "Ar1Spec",
    "gen_ar1",
    "ar1_paths",
    "transform_margin",
    "phi_for_tau",
    "kendall_tau_lag1",
]

# probabilities handed to quantile functions stay strictly inside (0, 1)
_P_LO = 1e-300
_P_HI = 1.0 - 2.0**-53


@dataclass(frozen=True)
class Ar1Spec:
    """AR(1) driver; ``innovation_var=None`` calibrates to unit variance."""

    phi: float
    n: int
    innovation_var: float | None = None

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ParameterError(f"AR(1) coefficient must satisfy |phi| < 1, got {self.phi}")
        if self.n < 1:
            raise ParameterError(f"series length must be positive, got {self.n}")
        if self.innovation_var is not None and self.innovation_var <= 0.0:
            raise ParameterError("innovation variance must be positive")

    @property
    def resolved_innovation_var(self) -> float:
        return (1.0 - self.phi**2) if self.innovation_var is None else self.innovation_var


def ar1_paths(phi: float, z: np.ndarray, innovation_var: float | None = None) -> np.ndarray:
    """Turn standard-normal draws ``(..., n)`` into stationary AR(1) paths.

    The first draw seeds the process from its exact stationary law, so
    every index has the stationary marginal and no burn-in is needed.
    """
    if not abs(phi) < 1.0:
        raise ParameterError(f"AR(1) coefficient must satisfy |phi| < 1, got {phi}")
    var_eps = (1.0 - phi**2) if innovation_var is None else float(innovation_var)
    e = z * np.sqrt(var_eps)
    e[..., 0] = z[..., 0] * np.sqrt(var_eps / (1.0 - phi**2))
    return signal.lfilter([1.0], [1.0, -phi], e, axis=-1)


def gen_ar1(spec: Ar1Spec, rng: np.random.Generator) -> np.ndarray:
    """One stationary AR(1) path of length ``spec.n``."""
    z = rng.standard_normal(spec.n)
    return ar1_paths(spec.phi, z, spec.innovation_var)


def transform_margin(w, family: Family, params) -> np.ndarray:
    """Elementwise ``Q(Phi(w))`` onto the target margin; rank-preserving."""
    p = np.clip(special.ndtr(np.asarray(w, dtype=float)), _P_LO, _P_HI)
    return np.asarray(family.quantile(params, p), dtype=float)


def phi_for_tau(tau: float) -> float:
    """AR(1) coefficient matching a lag-1 Kendall's tau (Gaussian driver)."""
    if not abs(tau) < 1.0:
        raise ParameterError(f"tau must satisfy |tau| < 1, got {tau}")
    return float(np.sin(0.5 * np.pi * tau))


def _dense_ranks(v: np.ndarray) -> np.ndarray:
    return np.unique(v, return_inverse=True)[1].astype(np.int64)


def _count_inversions(ranks: np.ndarray) -> int:
    """Merge-count of strict inversions, one vectorized level at a time."""
    a = ranks.copy()
    m = a.size
    span = int(a.max()) + 1 if m else 1
    total = 0
    width = 1
    while width < m:
        step = 2 * width
        nfull = m // step
        cut = nfull * step
        if nfull:
            blk = a[:cut].reshape(nfull, step)
            left = blk[:, :width]
            right = blk[:, width:]
            # row offsets let one flat searchsorted serve every block pair
            off = np.arange(nfull, dtype=np.int64)[:, None] * span
            pos = np.searchsorted((left + off).ravel(), (right + off).ravel(), side="right")
            ends = np.repeat((np.arange(nfull, dtype=np.int64) + 1) * width, width)
            total += int(np.sum(ends - pos))
            blk.sort(axis=1)
        if m - cut > width:  # ragged tail pair
            left = a[cut : cut + width]
            right = a[cut + width : m]
            pos = np.searchsorted(left, right, side="right")
            total += int(np.sum(width - pos))
            a[cut:m] = np.sort(a[cut:m])
        width = step
    return total


def _pair_ties(v: np.ndarray) -> int:
    counts = np.unique(v, return_counts=True)[1]
    return int(np.sum(counts * (counts - 1) // 2))


def kendall_tau_lag1(x) -> float:
    """Tie-adjusted (tau-b) Kendall correlation of ``(x_i, x_{i+1})`` pairs."""
    v = as_sample(x, min_len=3)
    a, b = v[:-1], v[1:]
    m = a.size
    n0 = m * (m - 1) // 2
    n1 = _pair_ties(a)
    n2 = _pair_ties(b)
    if n1 == n0 or n2 == n0:
        raise DegenerateSampleError("Kendall's tau is undefined for a constant series")
    order = np.lexsort((b, a))
    ao, bo = a[order], b[order]
    run_starts = np.concatenate([[True], (ao[1:] != ao[:-1]) | (bo[1:] != bo[:-1])])
    run_lengths = np.diff(np.append(np.flatnonzero(run_starts), m))
    n3 = int(np.sum(run_lengths * (run_lengths - 1) // 2))
    swaps = _count_inversions(_dense_ranks(b)[order])
    numer = n0 - n1 - n2 + n3 - 2 * swaps
    return float(numer / np.sqrt((n0 - n1) * (n0 - n2)))
