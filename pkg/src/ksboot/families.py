"""Parametric marginal families: CDF, quantile, and maximum-likelihood fit.

A family object is stateless and hashable; parameter vectors travel
separately as plain float arrays.  All three fittable families carry two
parameters: Normal ``(mean, variance)``, Gamma ``(shape, rate)``, and
Student-t with fixed degrees of freedom ``(location, scale)``.  The
Student-t's degrees of freedom and the truncation point of
``TruncatedBelow`` belong to the family, never to the parameter vector.

``cdf`` and ``quantile`` broadcast: ``params`` may be a single vector
``(d,)`` or a batch ``(m, d)``, and ``x`` any shape compatible with the
batch dimension, which is what the bootstrap engine leans on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ._util import as_sample
from .errors import (
    ConvergenceError,
    DegenerateSampleError,
    KsbootError,
    ParameterError,
    SupportError,
)

__all__ = [
    "Family",
    "Normal",
    "Gamma",
    "StudentT",
    "TruncatedBelow",
    "family_from_json",
    "family_from_name",
    "params_to_json",
    "params_from_json",
]


def _columns(params, d):
    """Split a params vector or batch into broadcastable columns."""
    p = np.asarray(params, dtype=float)
    if p.ndim == 1:
        if p.shape[0] != d:
            raise ParameterError(f"expected {d} parameters, got {p.shape[0]}")
        return tuple(p[k] for k in range(d))
    if p.ndim == 2:
        if p.shape[1] != d:
            raise ParameterError(f"expected {d} parameters, got {p.shape[1]}")
        return tuple(p[:, k : k + 1] for k in range(d))
    raise ParameterError(f"params must be a vector or a batch, got ndim={p.ndim}")


def _quadratic_roots(a, b, c):
    """Real roots of ``a x^2 + b x + c``, NaN-padded to shape ``(..., 2)``.

    Numerically stable for ``a`` near zero (one root escapes to infinity,
    the other stays put); ``a == 0`` falls back to the linear root.
    """
    a, b, c = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(c, float))
    out = np.full(a.shape + (2,), np.nan)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        linear = a == 0.0
        out[..., 0] = np.where(linear & (b != 0.0), -c / b, out[..., 0])
        disc = b * b - 4.0 * a * c
        ok = ~linear & (disc >= 0.0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        q = -0.5 * (b + np.where(b >= 0.0, sq, -sq))
        r1 = np.where(ok, q / a, np.nan)
        r2 = np.where(ok & (q != 0.0), c / q, np.nan)
        out[..., 0] = np.where(ok, r1, out[..., 0])
        out[..., 1] = np.where(ok, r2, out[..., 1])
    out[~np.isfinite(out)] = np.nan
    return out


class Family:
    """Base interface; concrete families are frozen dataclasses below."""

    n_params = 2
    param_names: tuple[str, ...] = ()

    def cdf(self, params, x):
        raise NotImplementedError

    def pdf(self, params, x):
        raise NotImplementedError

    def quantile(self, params, p):
        raise NotImplementedError

    def density_crossings(self, params_a, params_b):
        """Solutions of ``pdf(x; a) = pdf(x; b)``, NaN-padded ``(..., 2)``.

        These are the interior extrema of ``F(x; a) - F(x; b)``, needed to
        take an exact supremum of the bias-corrected bootstrap process.
        """
        raise NotImplementedError

    def fit(self, sample) -> np.ndarray:
        raise NotImplementedError

    def validate_params(self, params) -> np.ndarray:
        raise NotImplementedError

    def _fit_counts(self, grid, counts):
        """Batch MLE from value multiplicities.

        ``grid`` is the shared value vector ``(G,)`` and ``counts`` an
        ``(m, G)`` nonnegative integer matrix, one bootstrap resample per
        row.  Returns ``(params (m, d), ok (m,))``; rows with ``ok=False``
        failed (degenerate or non-convergent) and carry no usable params.
        """
        raise NotImplementedError

    def _fit_values(self, values):
        """Batch MLE from raw samples ``(m, n)``; same contract as above."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def __str__(self):
        return self.to_json()["family"]

    @staticmethod
    def _check_prob(p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise ParameterError("quantile probabilities must lie strictly in (0, 1)")
        return p


@dataclass(frozen=True)
class Normal(Family):
    param_names = ("mean", "variance")

    def validate_params(self, params):
        p = np.asarray(params, dtype=float)
        if p.shape[-1] != 2 or not np.all(np.isfinite(p)) or np.any(p[..., 1] <= 0.0):
            raise ParameterError(f"invalid Normal params {params!r}: need finite mean, variance > 0")
        return p

    def cdf(self, params, x):
        mu, var = _columns(self.validate_params(params), 2)
        return special.ndtr((np.asarray(x, dtype=float) - mu) / np.sqrt(var))

    def pdf(self, params, x):
        mu, var = _columns(self.validate_params(params), 2)
        z = (np.asarray(x, dtype=float) - mu) / np.sqrt(var)
        return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi * var)

    def quantile(self, params, p):
        mu, var = _columns(self.validate_params(params), 2)
        return mu + np.sqrt(var) * special.ndtri(self._check_prob(p))

    def density_crossings(self, params_a, params_b):
        pa = self.validate_params(params_a)
        pb = self.validate_params(params_b)
        m1, v1 = pa[..., 0], pa[..., 1]
        m2, v2 = pb[..., 0], pb[..., 1]
        a = 0.5 / v2 - 0.5 / v1
        b = m1 / v1 - m2 / v2
        c = 0.5 * m2 * m2 / v2 - 0.5 * m1 * m1 / v1 - 0.5 * np.log(v1 / v2)
        return _quadratic_roots(a, b, c)

    def fit(self, sample):
        x = as_sample(sample, min_len=2)
        mu = x.mean()
        var = float(np.mean((x - mu) ** 2))  # MLE divisor n
        if var <= 0.0:
            raise DegenerateSampleError("constant sample: Normal variance MLE is zero")
        return np.array([mu, var])

    def _fit_counts(self, grid, counts):
        n = counts.sum(axis=1, keepdims=True)
        c0 = grid.mean()  # center to dodge cancellation in the variance
        g = grid - c0
        m1 = (counts @ g) / n[:, 0]
        m2 = (counts @ (g * g)) / n[:, 0]
        var = m2 - m1 * m1
        ok = var > 0.0
        return np.column_stack([m1 + c0, var]), ok

    def _fit_values(self, values):
        mu = values.mean(axis=1)
        var = np.mean((values - mu[:, None]) ** 2, axis=1)
        return np.column_stack([mu, var]), var > 0.0

    def to_json(self):
        return {"family": "normal"}


def _gamma_shape_from_s(s, max_iter=100, tol=1e-10):
    """Solve log(a) - digamma(a) = s by Newton, vectorized over s.

    Returns ``(alpha, ok, trace)``; ``trace`` records the last absolute
    update per element (for convergence diagnostics).
    """
    s = np.asarray(s, dtype=float)
    bad = ~(s > 0.0) | ~np.isfinite(s)
    s_safe = np.where(bad, 1.0, s)
    # moment-style starting point, accurate to a few percent
    a = (3.0 - s_safe + np.sqrt((s_safe - 3.0) ** 2 + 24.0 * s_safe)) / (12.0 * s_safe)
    converged = np.zeros(s.shape, dtype=bool)
    trace = []
    for _ in range(max_iter):
        f = np.log(a) - special.psi(a) - s_safe
        fprime = 1.0 / a - special.polygamma(1, a)
        step = f / fprime
        a_new = a - step
        # keep iterates positive; bisect toward zero if Newton overshoots
        a_new = np.where(a_new <= 0.0, a / 2.0, a_new)
        delta = np.abs(a_new - a)
        trace.append(float(np.max(np.where(converged, 0.0, delta))))
        converged |= delta < tol * np.maximum(1.0, a_new)
        a = a_new
        if converged.all():
            break
    ok = converged & ~bad & np.isfinite(a) & (a > 0.0)
    return a, ok, trace


@dataclass(frozen=True)
class Gamma(Family):
    param_names = ("shape", "rate")

    def validate_params(self, params):
        p = np.asarray(params, dtype=float)
        if p.shape[-1] != 2 or not np.all(np.isfinite(p)) or np.any(p <= 0.0):
            raise ParameterError(f"invalid Gamma params {params!r}: need shape > 0, rate > 0")
        return p

    def cdf(self, params, x):
        a, b = _columns(self.validate_params(params), 2)
        x = np.asarray(x, dtype=float)
        return special.gammainc(a, b * np.clip(x, 0.0, None))

    def pdf(self, params, x):
        a, b = _columns(self.validate_params(params), 2)
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            logpdf = a * np.log(b) + (a - 1.0) * np.log(x) - b * x - special.gammaln(a)
        return np.where(x > 0.0, np.exp(logpdf), 0.0)

    def quantile(self, params, p):
        a, b = _columns(self.validate_params(params), 2)
        return special.gammaincinv(a, self._check_prob(p)) / b

    def density_crossings(self, params_a, params_b):
        # log-density difference is a*log(x) + b*x + k; roots via Lambert W
        pa = self.validate_params(params_a)
        pb = self.validate_params(params_b)
        a1, b1 = pa[..., 0], pa[..., 1]
        a2, b2 = pb[..., 0], pb[..., 1]
        a = np.asarray(a1 - a2, dtype=float)
        b = np.asarray(b2 - b1, dtype=float)
        k = a1 * np.log(b1) - a2 * np.log(b2) - special.gammaln(a1) + special.gammaln(a2)
        out = np.full(np.broadcast(a, b, k).shape + (2,), np.nan)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lin_a = (a == 0.0) & (b != 0.0)  # b*x + k = 0
            out[..., 0] = np.where(lin_a, -k / b, out[..., 0])
            lin_b = (b == 0.0) & (a != 0.0)  # a*log(x) + k = 0
            out[..., 0] = np.where(lin_b, np.exp(-k / a), out[..., 0])
            gen = (a != 0.0) & (b != 0.0)
            w = (b / a) * np.exp(-k / a)
            for slot, branch in enumerate((0, -1)):
                u = special.lambertw(np.where(gen, w, 1.0), k=branch)
                x = (a / b) * np.real(u)
                valid = gen & (np.abs(np.imag(u)) < 1e-12) & (x > 0.0) & np.isfinite(x)
                out[..., slot] = np.where(valid, x, out[..., slot])
        out[~(out > 0.0)] = np.nan  # support is (0, inf)
        return out

    def fit(self, sample):
        x = as_sample(sample, min_len=2)
        if np.any(x <= 0.0):
            raise SupportError("Gamma sample must be strictly positive")
        mean = x.mean()
        s = float(np.log(mean) - np.mean(np.log(x)))
        if s <= 0.0:
            raise DegenerateSampleError("constant sample: Gamma likelihood is degenerate")
        alpha, ok, trace = _gamma_shape_from_s(np.array([s]))
        if not ok[0]:
            raise ConvergenceError("Gamma shape Newton iteration did not converge", trace=trace)
        return np.array([alpha[0], alpha[0] / mean])

    def _fit_counts(self, grid, counts):
        if np.any(grid <= 0.0):
            raise SupportError("Gamma sample must be strictly positive")
        n = counts.sum(axis=1)
        mean = (counts @ grid) / n
        s = np.log(mean) - (counts @ np.log(grid)) / n
        alpha, ok, _ = _gamma_shape_from_s(s)
        rate = alpha / mean
        return np.column_stack([alpha, rate]), ok & (rate > 0.0)

    def _fit_values(self, values):
        if np.any(values <= 0.0):
            raise SupportError("Gamma sample must be strictly positive")
        mean = values.mean(axis=1)
        s = np.log(mean) - np.mean(np.log(values), axis=1)
        alpha, ok, _ = _gamma_shape_from_s(s)
        rate = alpha / mean
        return np.column_stack([alpha, rate]), ok & (rate > 0.0)

    def to_json(self):
        return {"family": "gamma"}


def _t_em(values, counts, nu, max_iter=500, tol=1e-9):
    """Location-scale Student-t MLE by iteratively reweighted updates.

    ``values`` is ``(G,)`` with ``counts (m, G)``, or ``(m, n)`` with
    ``counts=None``.  Weights are ``(nu+1)/(nu+z^2)``; scale update uses
    divisor n.  Returns ``(loc (m,), scale (m,), ok (m,), trace)``.
    """
    if counts is None:
        w_base = np.ones_like(values)
        n = np.full(values.shape[0], values.shape[1], dtype=float)
        v = values
    else:
        w_base = counts.astype(float)
        n = counts.sum(axis=1).astype(float)
        v = np.broadcast_to(values, counts.shape)

    loc = (w_base * v).sum(axis=1) / n
    var = (w_base * (v - loc[:, None]) ** 2).sum(axis=1) / n
    ok = var > 0.0
    scale = np.sqrt(np.where(ok, var, 1.0))
    converged = np.zeros(loc.shape, dtype=bool)
    trace = []
    for _ in range(max_iter):
        z = (v - loc[:, None]) / scale[:, None]
        w = w_base * (nu + 1.0) / (nu + z * z)
        sw = w.sum(axis=1)
        loc_new = (w * v).sum(axis=1) / sw
        scale_new = np.sqrt((w * (v - loc_new[:, None]) ** 2).sum(axis=1) / n)
        delta = np.maximum(np.abs(loc_new - loc), np.abs(scale_new - scale))
        trace.append(float(np.max(np.where(converged, 0.0, delta))))
        converged |= delta < tol
        loc, scale = loc_new, scale_new
        if converged.all():
            break
    ok &= converged & np.isfinite(loc) & np.isfinite(scale) & (scale > 0.0)
    return loc, scale, ok, trace


@dataclass(frozen=True)
class StudentT(Family):
    """Location-scale Student-t with fixed degrees of freedom ``nu``."""

    nu: float
    param_names = ("location", "scale")

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0.0):
            raise ParameterError(f"degrees of freedom must be a positive real, got {self.nu!r}")

    def validate_params(self, params):
        p = np.asarray(params, dtype=float)
        if p.shape[-1] != 2 or not np.all(np.isfinite(p)) or np.any(p[..., 1] <= 0.0):
            raise ParameterError(f"invalid Student-t params {params!r}: need finite location, scale > 0")
        return p

    def cdf(self, params, x):
        loc, scale = _columns(self.validate_params(params), 2)
        return special.stdtr(self.nu, (np.asarray(x, dtype=float) - loc) / scale)

    def pdf(self, params, x):
        loc, scale = _columns(self.validate_params(params), 2)
        z = (np.asarray(x, dtype=float) - loc) / scale
        lognorm = special.gammaln(0.5 * (self.nu + 1.0)) - special.gammaln(0.5 * self.nu)
        lognorm -= 0.5 * np.log(self.nu * np.pi)
        return np.exp(lognorm - 0.5 * (self.nu + 1.0) * np.log1p(z * z / self.nu)) / scale

    def quantile(self, params, p):
        loc, scale = _columns(self.validate_params(params), 2)
        return loc + scale * special.stdtrit(self.nu, self._check_prob(p))

    def density_crossings(self, params_a, params_b):
        # pdf equality reduces to z1^2 - r z2^2 = (r - 1) nu, a quadratic in x
        pa = self.validate_params(params_a)
        pb = self.validate_params(params_b)
        m1, s1 = pa[..., 0], pa[..., 1]
        m2, s2 = pb[..., 0], pb[..., 1]
        r = (s2 / s1) ** (2.0 / (self.nu + 1.0))
        a = 1.0 / (s1 * s1) - r / (s2 * s2)
        b = 2.0 * (r * m2 / (s2 * s2) - m1 / (s1 * s1))
        c = (m1 * m1) / (s1 * s1) - r * (m2 * m2) / (s2 * s2) - (r - 1.0) * self.nu
        return _quadratic_roots(a, b, c)

    def fit(self, sample):
        x = as_sample(sample, min_len=2)
        if np.ptp(x) == 0.0:
            raise DegenerateSampleError("constant sample: Student-t scale MLE is zero")
        loc, scale, ok, trace = _t_em(x[None, :], None, self.nu)
        if not ok[0]:
            raise ConvergenceError(
                f"Student-t EM did not converge within cap (nu={self.nu})", trace=trace
            )
        return np.array([loc[0], scale[0]])

    def _fit_counts(self, grid, counts):
        loc, scale, ok, _ = _t_em(grid, counts, self.nu)
        return np.column_stack([loc, scale]), ok

    def _fit_values(self, values):
        loc, scale, ok, _ = _t_em(values, None, self.nu)
        return np.column_stack([loc, scale]), ok

    def to_json(self):
        return {"family": "student_t", "nu": self.nu}


@dataclass(frozen=True)
class TruncatedBelow(Family):
    """``inner`` conditioned on exceeding ``cut``; generation-side only."""

    inner: Family
    cut: float

    @property
    def param_names(self):
        return self.inner.param_names

    def validate_params(self, params):
        p = self.inner.validate_params(params)
        mass = self.inner.cdf(params, self.cut)
        if np.any(mass >= 1.0):
            raise ParameterError(f"no mass above the truncation point {self.cut}")
        return p

    def cdf(self, params, x):
        self.validate_params(params)
        x = np.asarray(x, dtype=float)
        f_cut = self.inner.cdf(params, self.cut)
        out = (self.inner.cdf(params, x) - f_cut) / (1.0 - f_cut)
        return np.clip(out, 0.0, 1.0)

    def pdf(self, params, x):
        self.validate_params(params)
        x = np.asarray(x, dtype=float)
        f_cut = self.inner.cdf(params, self.cut)
        return np.where(x > self.cut, self.inner.pdf(params, x) / (1.0 - f_cut), 0.0)

    def quantile(self, params, p):
        self.validate_params(params)
        p = self._check_prob(p)
        f_cut = self.inner.cdf(params, self.cut)
        return self.inner.quantile(params, f_cut + p * (1.0 - f_cut))

    def fit(self, sample):
        raise KsbootError("maximum-likelihood fitting is not supported for truncated families")

    def to_json(self):
        return {"family": "truncated_below", "cut": self.cut, "inner": self.inner.to_json()}


_SCALAR_FAMILIES = {"normal": Normal, "gamma": Gamma, "student_t": StudentT}


def family_from_name(name: str, nu: float | None = None) -> Family:
    """Build a family from a CLI-style name; ``nu=inf`` maps to Normal."""
    key = name.strip().lower().replace("-", "_")
    if key in ("t", "student_t", "studentt"):
        if nu is None:
            raise ParameterError("Student-t requires degrees of freedom (nu)")
        if np.isinf(nu):
            return Normal()
        return StudentT(nu=float(nu))
    if key == "normal":
        return Normal()
    if key == "gamma":
        return Gamma()
    raise ParameterError(f"unknown family {name!r}; expected normal, gamma, or student-t")


def family_from_json(obj: dict) -> Family:
    """Inverse of ``Family.to_json``."""
    kind = obj.get("family")
    if kind == "truncated_below":
        return TruncatedBelow(inner=family_from_json(obj["inner"]), cut=float(obj["cut"]))
    if kind == "student_t":
        return StudentT(nu=float(obj["nu"]))
    if kind in _SCALAR_FAMILIES and kind != "student_t":
        return _SCALAR_FAMILIES[kind]()
    raise ParameterError(f"unknown family kind {kind!r}")


def params_to_json(family: Family, params) -> dict:
    """Single JSON object carrying both the family and a parameter vector."""
    out = dict(family.to_json())
    out["params"] = [float(v) for v in np.asarray(params, dtype=float)]
    return out


def params_from_json(obj: dict) -> tuple[Family, np.ndarray]:
    family = family_from_json(obj)
    params = np.asarray(obj.get("params", []), dtype=float)
    if params.size:
        family.validate_params(params)
    return family, params
