"""Bootstrap goodness-of-fit tests for the marginal of a stationary series.

Four procedures share one result type:

* ``npbb_test`` -- circular block bootstrap with a bias correction, either
  the bootstrap-expectation centering (``kn``) or the sample-based
  centering (``cn``).
* ``npb_test`` -- iid bootstrap with the sample-based centering; the block
  test with ``l = 1`` and ``cn`` reproduces it replicate for replicate.
* ``pb_test`` -- parametric bootstrap: simulate from the fit, refit, no
  centering needed.
* ``spb_test`` -- semiparametric baseline with an AR(1) working model on
  normal scores (an approximation of the published baseline).

Replicate ``b`` always draws from the stream ``(seed, b)`` and, on a fit
failure, is redrawn from ``(seed, b, attempt)``; results therefore never
depend on execution order or worker count.  The block test makes two
passes over the replicates, regenerating each resample from its stream
instead of storing index matrices, so memory stays O(n + B).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._rng import substream
from ._util import as_sample
from .edf import StepAverage, StepCorrection, _ks_batch, _SupKernel, ks_statistic
from .errors import BlockLengthError, BootstrapAbort, DegenerateSampleError, NearUnitRootError, ParameterError
from .families import Family
from .resampling import BootstrapPlan
from .tsgen import ar1_paths

__all__ = ["GofResult", "npbb_test", "npb_test", "pb_test", "spb_test", "bootstrap_ecdf_mean"]

_CHUNK = 256
_MAX_ATTEMPTS = 12
_P_LO = 1e-300


@dataclass
class GofResult:
    """Observed statistic, bootstrap statistics, and the exceedance p-value."""

    test: str
    family: Family
    t_obs: float
    t_boot: np.ndarray
    p_value: float
    fitted: np.ndarray
    theta_star: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = self.diagnostics
        out = {
            "test": self.test,
            "family": self.family.to_json(),
            "t_obs": self.t_obs,
            "p_value": self.p_value,
            "B": int(self.t_boot.size),
            "l": d.get("l"),
            "correction": {"kn": "Kn", "cn": "Cn"}.get(d.get("correction")),
            "seed": d.get("seed"),
            "fitted": [float(v) for v in self.fitted],
            "theta_star": None if self.theta_star is None else [float(v) for v in self.theta_star],
            "diagnostics": {
                k: d[k] for k in ("scheme", "block_rule", "phi_hat", "redrawn_replicates", "warnings") if k in d
            },
        }
        return out


def _p_value(t_boot: np.ndarray, t_obs: float) -> float:
    return float(np.count_nonzero(t_boot > t_obs) / t_boot.size)


def _chunks(total: int, size: int = _CHUNK):
    for lo in range(0, total, size):
        yield np.arange(lo, min(lo + size, total))


class _RedrawLog:
    """Tracks fit failures against the 1% abort threshold."""

    def __init__(self, B: int, test: str):
        self.B = B
        self.test = test
        self.failed_replicates: set[int] = set()
        self.warnings: list[str] = []

    def record(self, b: int, attempt: int):
        self.failed_replicates.add(b)
        self.warnings.append(f"replicate {b}: fit failed on attempt {attempt}; redrawing")
        if len(self.failed_replicates) > 0.01 * self.B:
            raise BootstrapAbort(
                f"{self.test}: {len(self.failed_replicates)} of {self.B} bootstrap replicates "
                "failed to fit (> 1%)",
                failures=len(self.failed_replicates),
                total=self.B,
                causes=self.warnings[-10:],
            )

    def exhausted(self, b: int):
        raise BootstrapAbort(
            f"{self.test}: replicate {b} failed to fit after {_MAX_ATTEMPTS} redraws",
            failures=len(self.failed_replicates),
            total=self.B,
            causes=self.warnings[-10:],
        )


class _BlockResampler:
    """Regenerates per-replicate multiplicity rows on the distinct-value grid."""

    def __init__(self, n: int, l: int, ids: np.ndarray, n_grid: int, seed: int):
        self.n = n
        self.l = l
        self.ids = ids
        self.n_grid = n_grid
        self.seed = seed
        self.k = -(-n // l)
        self.offsets = np.arange(l)

    def _rng(self, b: int, attempt: int) -> np.random.Generator:
        if attempt == 0:
            return substream(self.seed, b)
        return substream(self.seed, b, attempt)

    def indices(self, b: int, attempt: int = 0) -> np.ndarray:
        starts = self._rng(b, attempt).integers(0, self.n, size=self.k)
        return ((starts[:, None] + self.offsets) % self.n).ravel()[: self.n]

    def counts(self, bs: np.ndarray, attempts: np.ndarray) -> np.ndarray:
        m = bs.size
        starts = np.empty((m, self.k), dtype=np.int64)
        for i, b in enumerate(bs):
            starts[i] = self._rng(int(b), int(attempts[b])).integers(0, self.n, size=self.k)
        idx = ((starts[:, :, None] + self.offsets) % self.n).reshape(m, -1)[:, : self.n]
        flat = self.ids[idx] + (np.arange(m) * self.n_grid)[:, None]
        return (
            np.bincount(flat.ravel(), minlength=m * self.n_grid).reshape(m, self.n_grid).astype(float)
        )


def _resample_gof(x, family, l, B, seed, correction, scheme, test_name, block_rule=None):
    """Shared engine for the resampling-based tests (npbb, npb)."""
    n = x.size
    fitted = family.fit(x)
    t_obs = ks_statistic(x, family, fitted)
    grid, mult = np.unique(x, return_counts=True)
    ids = np.searchsorted(grid, x)
    sampler = _BlockResampler(n, l, ids, grid.size, seed)
    attempts = np.zeros(B, dtype=np.int64)
    log = _RedrawLog(B, test_name)

    def fit_chunk(bs, counts):
        params, ok = family._fit_counts(grid, counts)
        for i in np.flatnonzero(~ok):
            b = int(bs[i])
            attempt = int(attempts[b])
            while True:
                log.record(b, attempt)
                attempt += 1
                if attempt > _MAX_ATTEMPTS:
                    log.exhausted(b)
                attempts[b] = attempt
                row = sampler.counts(np.array([b]), attempts)
                p_row, ok_row = family._fit_counts(grid, row)
                if ok_row[0]:
                    counts[i] = row[0]
                    params[i] = p_row[0]
                    break
        return params

    params_all = np.empty((B, family.n_params))
    theta_star = None
    if correction == "kn":
        sum_f = np.zeros(grid.size)
        for bs in _chunks(B):
            counts = sampler.counts(bs, attempts)
            params_all[bs] = fit_chunk(bs, counts)
            sum_f += np.cumsum(counts, axis=1).sum(axis=0) / n
        theta_star = params_all.mean(axis=0)
        corr = StepCorrection(grid, sum_f / B, family, theta_star)
    else:
        corr = StepCorrection(grid, np.cumsum(mult) / n, family, fitted)

    kernel = _SupKernel(n, grid, family, corr)
    t_boot = np.empty(B)
    for bs in _chunks(B):
        counts = sampler.counts(bs, attempts)
        params = params_all[bs] if correction == "kn" else fit_chunk(bs, counts)
        t_boot[bs] = kernel(counts, params)

    diagnostics = {
        "scheme": scheme,
        "l": l,
        "correction": correction,
        "seed": seed,
        "redrawn_replicates": len(log.failed_replicates),
        "warnings": log.warnings,
    }
    if block_rule is not None:
        diagnostics["block_rule"] = block_rule
    return GofResult(
        test=test_name,
        family=family,
        t_obs=t_obs,
        t_boot=t_boot,
        p_value=_p_value(t_boot, t_obs),
        fitted=fitted,
        theta_star=theta_star,
        diagnostics=diagnostics,
    )


def npbb_test(sample, family: Family, plan: BootstrapPlan, correction: str = "kn") -> GofResult:
    """Block-bootstrap KS test with bias correction ``kn`` or ``cn``."""
    kind = correction.lower()
    if kind not in ("kn", "cn"):
        raise ParameterError(f"correction must be 'kn' or 'cn', got {correction!r}")
    if plan.scheme != "circular_block":
        raise ParameterError("npbb_test requires a circular_block plan")
    x = as_sample(sample, min_len=2)
    l = plan.resolve_block_length(x)
    if x.size < 2 * l:
        raise BlockLengthError(f"need sample length >= 2*l; got n={x.size}, l={l}")
    return _resample_gof(
        x, family, l, plan.B, plan.seed, kind, "circular_block", "npbb", block_rule=plan.block_rule
    )


def npb_test(sample, family: Family, B: int, seed: int) -> GofResult:
    """Iid-bootstrap KS test with the sample-based centering."""
    x = as_sample(sample, min_len=2)
    if B < 1:
        raise ParameterError(f"B must be positive, got {B}")
    return _resample_gof(x, family, 1, B, seed, "cn", "iid", "npb")


def _simulated_gof(x, family, B, seed, simulate_chunk, test_name, extra_diag=None):
    """Shared engine for the simulation-based tests (pb, spb)."""
    n = x.size
    fitted = family.fit(x)
    t_obs = ks_statistic(x, family, fitted)
    log = _RedrawLog(B, test_name)
    t_boot = np.empty(B)
    for bs in _chunks(B):
        values = simulate_chunk(bs, np.zeros(bs.size, dtype=np.int64))
        params, ok = family._fit_values(values)
        for i in np.flatnonzero(~ok):
            b = int(bs[i])
            attempt = 0
            while True:
                log.record(b, attempt)
                attempt += 1
                if attempt > _MAX_ATTEMPTS:
                    log.exhausted(b)
                row = simulate_chunk(np.array([b]), np.array([attempt]))
                p_row, ok_row = family._fit_values(row)
                if ok_row[0]:
                    values[i] = row[0]
                    params[i] = p_row[0]
                    break
        values.sort(axis=1)
        cdfs = np.asarray(family.cdf(params, values), dtype=float)
        t_boot[bs] = _ks_batch(values, cdfs)

    diagnostics = {
        "scheme": test_name,
        "l": None,
        "correction": None,
        "seed": seed,
        "redrawn_replicates": len(log.failed_replicates),
        "warnings": log.warnings,
    }
    diagnostics.update(extra_diag or {})
    return GofResult(
        test=test_name,
        family=family,
        t_obs=t_obs,
        t_boot=t_boot,
        p_value=_p_value(t_boot, t_obs),
        fitted=fitted,
        diagnostics=diagnostics,
    )


def _sim_rng(seed, b, attempt):
    if attempt == 0:
        return substream(seed, b)
    return substream(seed, b, attempt)


def pb_test(sample, family: Family, B: int, seed: int) -> GofResult:
    """Parametric bootstrap: simulate from the fit, refit, compare."""
    x = as_sample(sample, min_len=2)
    if B < 1:
        raise ParameterError(f"B must be positive, got {B}")
    n = x.size
    fitted = family.fit(x)

    def simulate(bs, attempts):
        u = np.empty((bs.size, n))
        for i, b in enumerate(bs):
            u[i] = _sim_rng(seed, int(b), int(attempts[i])).random(n)
        np.clip(u, _P_LO, None, out=u)
        return np.asarray(family.quantile(fitted, u), dtype=float)

    return _simulated_gof(x, family, B, seed, simulate, "pb")


def spb_test(sample, family: Family, B: int, seed: int) -> GofResult:
    """Semiparametric baseline: AR(1) working model on normal scores."""
    x = as_sample(sample, min_len=30)
    if B < 1:
        raise ParameterError(f"B must be positive, got {B}")
    n = x.size
    fitted = family.fit(x)
    z = special.ndtri(np.clip(np.asarray(family.cdf(fitted, x), dtype=float), 1e-12, 1.0 - 1e-12))
    zc = z - z.mean()
    denom = float(np.dot(zc, zc))
    if denom <= 0.0:
        raise DegenerateSampleError("normal scores are constant; cannot fit a working AR(1)")
    phi_hat = float(np.dot(zc[:-1], zc[1:]) / denom)
    if not abs(phi_hat) < 0.999:
        raise NearUnitRootError(f"working AR(1) coefficient {phi_hat:.4f} is too close to a unit root")

    def simulate(bs, attempts):
        zmat = np.empty((bs.size, n))
        for i, b in enumerate(bs):
            zmat[i] = _sim_rng(seed, int(b), int(attempts[i])).standard_normal(n)
        w = ar1_paths(phi_hat, zmat)
        u = np.clip(special.ndtr(w), _P_LO, 1.0 - 2.0**-53)
        return np.asarray(family.quantile(fitted, u), dtype=float)

    return _simulated_gof(x, family, B, seed, simulate, "spb", extra_diag={"phi_hat": phi_hat})


def bootstrap_ecdf_mean(sample, l: int, B: int, seed: int) -> StepAverage:
    """Average bootstrap ECDF over B circular block resamples.

    Uses the same per-replicate streams as :func:`npbb_test`, so the
    returned step function is exactly the expectation estimate the ``kn``
    centering would use.
    """
    x = as_sample(sample, min_len=2)
    n = x.size
    if not 1 <= l <= n:
        raise BlockLengthError(f"block length {l} must satisfy 1 <= l <= n={n}")
    grid = np.unique(x)
    ids = np.searchsorted(grid, x)
    sampler = _BlockResampler(n, l, ids, grid.size, seed)
    attempts = np.zeros(B, dtype=np.int64)
    sum_f = np.zeros(grid.size)
    for bs in _chunks(B):
        counts = sampler.counts(bs, attempts)
        sum_f += np.cumsum(counts, axis=1).sum(axis=0) / n
    return StepAverage(grid=grid, heights=sum_f / B)
