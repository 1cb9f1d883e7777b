"""Empirical distribution functions and the supremum statistic kernel.

The goodness-of-fit statistic is ``sqrt(n) * sup_x |F_n(x) - F(x; theta)|``
with the supremum over the whole real line.  Without a correction term the
supremum sits at the sample jump points (the continuous CDF is monotone
between jumps), which is the classical order-statistics formula.  With a
correction the non-step part is a *difference* of two fitted CDFs and is
no longer monotone, so the evaluation set must also include the points
where the two densities cross; the kernel below adds those analytically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._util import as_sample
from .errors import DegenerateSampleError
from .families import Family

__all__ = ["Ecdf", "StepAverage", "StepCorrection", "ks_statistic", "corrected_sup"]


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous ECDF; ties contribute multiplicity/n jumps."""

    sorted_values: np.ndarray
    n: int

    @classmethod
    def from_sample(cls, sample) -> "Ecdf":
        x = as_sample(sample, min_len=1)
        return cls(sorted_values=np.sort(x), n=x.size)

    def __call__(self, x):
        return np.searchsorted(self.sorted_values, np.asarray(x, dtype=float), side="right") / self.n


@dataclass(frozen=True)
class StepAverage:
    """A step function on a fixed grid, e.g. the mean bootstrap ECDF.

    ``heights[j]`` is the right-limit value at ``grid[j]``; the function is
    0 left of ``grid[0]``.
    """

    grid: np.ndarray
    heights: np.ndarray

    def __call__(self, x):
        idx = np.searchsorted(self.grid, np.asarray(x, dtype=float), side="right")
        padded = np.concatenate([[0.0], self.heights])
        return padded[idx]


@dataclass(frozen=True)
class StepCorrection:
    """Centering term: step part minus a fitted continuous CDF.

    Evaluates to ``sqrt(n) * (S(x) - F(x; params))`` inside the supremum,
    where ``S`` is the step function ``heights`` on ``grid`` (right limits,
    0 left of the grid).
    """

    grid: np.ndarray
    heights: np.ndarray
    family: Family
    params: np.ndarray


def ks_statistic(sample, family: Family, params) -> float:
    """Scaled KS distance between the sample ECDF and ``F(.; params)``.

    Exact supremum: with ``F`` continuous the extrema sit at the order
    statistics, comparing ``i/n`` from the right and ``(i-1)/n`` from the
    left.
    """
    x = as_sample(sample, min_len=1)
    n = x.size
    xs = np.sort(x)
    cdf = np.asarray(family.cdf(params, xs), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    return float(np.sqrt(n) * max(d_plus, d_minus))


def _ks_batch(sorted_values: np.ndarray, cdf_values: np.ndarray) -> np.ndarray:
    """Row-wise scaled KS distances for pre-sorted samples ``(m, n)``."""
    _, n = sorted_values.shape
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    d_plus = (hi - cdf_values).max(axis=1)
    d_minus = (cdf_values - lo).max(axis=1)
    return np.sqrt(n) * np.maximum(d_plus, d_minus)


def _numeric_crossings(fam_a: Family, pa, fam_b: Family, pb) -> np.ndarray:
    """Bracketed root search for pdf_a = pdf_b across mixed families."""
    levels = np.linspace(1e-6, 1.0 - 1e-6, 1025)
    pts = np.union1d(
        np.asarray(fam_a.quantile(pa, levels), dtype=float),
        np.asarray(fam_b.quantile(pb, levels), dtype=float),
    )
    pts = pts[np.isfinite(pts)]
    diff = np.asarray(fam_a.pdf(pa, pts), dtype=float) - np.asarray(fam_b.pdf(pb, pts), dtype=float)
    sign = np.sign(diff)
    flips = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    roots = [
        optimize.brentq(
            lambda t: float(fam_a.pdf(pa, t) - fam_b.pdf(pb, t)), pts[i], pts[i + 1], xtol=1e-13
        )
        for i in flips
    ]
    roots.extend(pts[sign == 0.0])
    return np.asarray(roots, dtype=float)


class _SupKernel:
    """Exact supremum of the corrected process for batches on one grid.

    Shared across bootstrap replicates: the grid, the correction's
    one-sided limits, and the correction's continuous part are fixed,
    while each call brings per-replicate multiplicities and fitted params.
    """

    def __init__(self, n: int, grid: np.ndarray, family: Family, correction: StepCorrection | None):
        self.n = n
        self.grid = grid
        self.family = family
        self.correction = correction
        self.root_n = np.sqrt(n)
        if correction is None:
            self.corr_right = self.corr_left = np.zeros(grid.size)
        else:
            cont = np.asarray(correction.family.cdf(correction.params, grid), dtype=float)
            padded = np.concatenate([[0.0], np.asarray(correction.heights, dtype=float)])
            s_right = padded[np.searchsorted(correction.grid, grid, side="right")]
            s_left = padded[np.searchsorted(correction.grid, grid, side="left")]
            self.corr_right = self.root_n * (s_right - cont)
            self.corr_left = self.root_n * (s_left - cont)
            self.step_padded = padded

    def _crossing_points(self, params: np.ndarray) -> np.ndarray:
        corr = self.correction
        if self.family == corr.family:
            try:
                return np.atleast_2d(self.family.density_crossings(params, corr.params))
            except NotImplementedError:
                pass
        rows = []
        for row in np.atleast_2d(params):
            roots = _numeric_crossings(self.family, row, corr.family, corr.params)[:8]
            padded = np.full(8, np.nan)
            padded[: roots.size] = roots
            rows.append(padded)
        return np.stack(rows)

    def __call__(self, counts: np.ndarray, params: np.ndarray) -> np.ndarray:
        n, root_n = self.n, self.root_n
        cdf_grid = np.asarray(self.family.cdf(params, self.grid), dtype=float)
        cum = np.cumsum(counts, axis=1)
        h_right = root_n * (cum / n - cdf_grid) - self.corr_right
        h_left = root_n * ((cum - counts) / n - cdf_grid) - self.corr_left
        np.abs(h_right, out=h_right)
        np.abs(h_left, out=h_left)
        sup = np.maximum(h_right.max(axis=1), h_left.max(axis=1))
        if self.correction is None:
            return sup

        xc = self._crossing_points(params)
        # invalid crossings re-point at grid[0], already covered by the jump pass
        xc = np.where(np.isfinite(xc), xc, self.grid[0])
        pos = np.searchsorted(self.grid, xc.ravel(), side="right").reshape(xc.shape)
        cum_padded = np.concatenate([np.zeros((cum.shape[0], 1)), cum], axis=1)
        f_boot = np.take_along_axis(cum_padded, pos, axis=1) / n
        s_at = self.step_padded[pos]
        cdf_at = np.asarray(self.family.cdf(params, xc), dtype=float)
        cont_at = np.asarray(self.correction.family.cdf(self.correction.params, xc), dtype=float)
        h_cross = np.abs(root_n * (f_boot - cdf_at) - root_n * (s_at - cont_at))
        return np.maximum(sup, h_cross.max(axis=1))


def corrected_sup(bootstrap_sample, family: Family, boot_params, correction: StepCorrection | None) -> float:
    """Supremum of the bias-corrected bootstrap goodness-of-fit process.

    The evaluation set is the union of the jump points of the bootstrap
    ECDF and of the correction's step part (both one-sided limits at each)
    together with the crossing points of the two fitted densities, which
    is where the continuous part can peak between jumps.
    """
    try:
        x = as_sample(bootstrap_sample, min_len=1)
    except DegenerateSampleError as exc:
        raise DegenerateSampleError("empty bootstrap sample") from exc
    n = x.size
    values, mult = np.unique(x, return_counts=True)
    if correction is None:
        grid = values
        counts = mult.astype(float)
    else:
        grid = np.union1d(values, correction.grid)
        counts = np.zeros(grid.size)
        counts[np.searchsorted(grid, values)] = mult
    kernel = _SupKernel(n, grid, family, correction)
    params = np.atleast_2d(np.asarray(boot_params, dtype=float))
    return float(kernel(counts[None, :], params)[0])
