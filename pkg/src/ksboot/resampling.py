"""Resampling engines and block-length selection.

The circular scheme enumerates all ``n`` wrap-around blocks of length
``l`` and draws ``ceil(n/l)`` of them uniformly with replacement; the last
block is truncated from its head so the resample has length exactly ``n``.
With ``l = 1`` this degenerates to the iid bootstrap, consuming the random
stream identically, which keeps the two schemes exactly comparable under a
shared seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._util import as_sample
from .errors import BlockLengthError, ParameterError

__all__ = [
    "BootstrapPlan",
    "cube_root_block",
    "circular_blocks",
    "draw_block_resample",
    "draw_iid_resample",
    "politis_white_block",
    "BlockLengthWarning",
]


class BlockLengthWarning(UserWarning):
    """Raised when an automatic block length had to be clamped."""


def cube_root_block(n: int) -> int:
    """Ceiling of the cube root, guarded against floating-point drift."""
    if n < 1:
        raise BlockLengthError(f"series length must be positive, got {n}")
    l = int(np.ceil(n ** (1.0 / 3.0)))
    while l > 1 and (l - 1) ** 3 >= n:
        l -= 1
    while l**3 < n:
        l += 1
    return l


def circular_blocks(n: int, l: int) -> np.ndarray:
    """All ``n`` wrap-around index blocks of length ``l``, as an (n, l) array."""
    if not 1 <= l <= n:
        raise BlockLengthError(f"block length {l} must satisfy 1 <= l <= n={n}")
    starts = np.arange(n)
    return (starts[:, None] + np.arange(l)) % n


def draw_block_resample(n: int, l: int, rng: np.random.Generator) -> np.ndarray:
    """One circular block resample as an index vector of length ``n``."""
    if not 1 <= l <= n:
        raise BlockLengthError(f"block length {l} must satisfy 1 <= l <= n={n}")
    k = -(-n // l)
    starts = rng.integers(0, n, size=k)
    idx = (starts[:, None] + np.arange(l)) % n
    return idx.ravel()[:n]


def draw_iid_resample(n: int, rng: np.random.Generator) -> np.ndarray:
    """Plain with-replacement resample; identical stream use as ``l=1`` blocks."""
    if n < 1:
        raise BlockLengthError(f"series length must be positive, got {n}")
    return rng.integers(0, n, size=n)


def _autocovariances(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocovariances gamma(0..max_lag), divisor n."""
    n = x.size
    xc = x - x.mean()
    acov = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        acov[k] = np.dot(xc[: n - k], xc[k:]) / n
    return acov


def _flat_top(t: np.ndarray) -> np.ndarray:
    at = np.abs(t)
    return np.where(at <= 0.5, 1.0, np.where(at <= 1.0, 2.0 * (1.0 - at), 0.0))


def politis_white_block(series) -> int:
    """Plug-in circular-bootstrap block length.

    Flat-top lag-window estimates of the spectral quantities with the
    bandwidth chosen by the empirical autocorrelation rule: the window
    stops at twice the last lag before a run of ``k_n`` insignificant
    autocorrelations.  The raw selection is rounded up and clamped to
    ``[1, n]``; a clamp above ``n`` emits :class:`BlockLengthWarning`.
    """
    x = as_sample(series, min_len=20)
    n = x.size
    if np.ptp(x) == 0.0:
        raise BlockLengthError("block-length selection is undefined for a constant series")

    kn = max(5, int(np.ceil(np.sqrt(np.log10(n)))))
    m_max = int(np.ceil(np.sqrt(n))) + kn
    acov = _autocovariances(x, m_max)
    rho = acov[1:] / acov[0]
    crit = 2.0 * np.sqrt(np.log10(n) / n)
    insignificant = np.abs(rho) < crit

    m_hat = None
    for m in range(0, m_max - kn + 1):
        if insignificant[m : m + kn].all():
            m_hat = m
            break
    if m_hat is None:
        significant = np.flatnonzero(~insignificant)
        m_hat = int(significant[-1]) + 1 if significant.size else 0
    if m_hat == 0:
        return 1

    m = min(2 * m_hat, m_max)
    lags = np.arange(-m, m + 1)
    gam = acov[np.abs(lags)]
    lam = _flat_top(lags / m)
    g_hat = float(np.sum(lam * np.abs(lags) * gam))
    d_cb = (4.0 / 3.0) * float(np.sum(lam * gam)) ** 2
    if not np.isfinite(g_hat) or d_cb <= 0.0:
        return 1

    b_star = (2.0 * g_hat**2 / d_cb) ** (1.0 / 3.0) * n ** (1.0 / 3.0)
    l = int(np.ceil(b_star))
    if l > n:
        warnings.warn(
            f"plug-in block length {l} exceeds the series length {n}; clamping to {n}",
            BlockLengthWarning,
            stacklevel=2,
        )
        return n
    return max(1, l)


@dataclass(frozen=True)
class BootstrapPlan:
    """Resampling scheme plus block rule, replicate count, and seed."""

    scheme: str = "circular_block"  # "iid" | "circular_block"
    block_rule: str = "cube_root"  # "fixed" | "cube_root" | "politis_white"
    l: int | None = None
    B: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("iid", "circular_block"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.block_rule not in ("fixed", "cube_root", "politis_white"):
            raise ParameterError(f"unknown block rule {self.block_rule!r}")
        if self.block_rule == "fixed" and (self.l is None or self.l < 1):
            raise ParameterError("fixed block rule requires a positive block length l")
        if self.B < 1:
            raise ParameterError(f"replicate count B must be positive, got {self.B}")

    def resolve_block_length(self, series) -> int:
        """Block length for a concrete series (1 under the iid scheme)."""
        if self.scheme == "iid":
            return 1
        n = np.asarray(series).size
        if self.block_rule == "fixed":
            if self.l > n:
                raise BlockLengthError(f"fixed block length {self.l} exceeds series length {n}")
            return int(self.l)
        if self.block_rule == "cube_root":
            return cube_root_block(n)
        return politis_white_block(series)

    def to_json(self) -> dict:
        out = {"scheme": self.scheme, "block_rule": self.block_rule, "B": self.B, "seed": self.seed}
        if self.l is not None:
            out["l"] = self.l
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "BootstrapPlan":
        return cls(
            scheme=obj.get("scheme", "circular_block"),
            block_rule=obj.get("block_rule", "cube_root"),
            l=obj.get("l"),
            B=int(obj.get("B", 1000)),
            seed=int(obj.get("seed", 0)),
        )
