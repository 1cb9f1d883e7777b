"""Monte Carlo size/power harness with deterministic parallel execution.

A grid cell is (margin, tau, n); each of its R replicates generates a
stationary path, runs the configured test, and records the p-value.  Every
replicate's randomness is derived from ``(seed, r, ...)``, so reruns are
byte-identical no matter how the replicates are scheduled across workers.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import derive_seed, substream
from .errors import ConfigError, KsbootError
from .families import Family, TruncatedBelow, family_from_json, params_to_json
from .gof import GofResult, npb_test, npbb_test, pb_test, spb_test
from .resampling import BootstrapPlan
from .tsgen import Ar1Spec, gen_ar1, phi_for_tau, transform_margin

__all__ = [
    "Margin",
    "TestSpec",
    "CellSummary",
    "ExperimentGrid",
    "run_size_cell",
    "run_power_cell",
    "run_grid",
    "summarize_qq",
    "empirical_size",
]


@dataclass(frozen=True)
class Margin:
    """A data-generating margin: family plus fixed parameter values."""

    family: Family
    params: tuple[float, ...]
    label: str | None = None

    def __post_init__(self):
        self.family.validate_params(np.asarray(self.params, dtype=float))

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        inner = ",".join(f"{v:g}" for v in self.params)
        fam = self.family.to_json()["family"]
        if isinstance(self.family, TruncatedBelow):
            return f"{fam}({inner};cut={self.family.cut:g})"
        return f"{fam}({inner})"

    def generate(self, n: int, tau: float, rng: np.random.Generator) -> np.ndarray:
        w = gen_ar1(Ar1Spec(phi=phi_for_tau(tau), n=n), rng)
        return transform_margin(w, self.family, np.asarray(self.params, dtype=float))

    def to_json(self) -> dict:
        out = params_to_json(self.family, np.asarray(self.params, dtype=float))
        if self.label:
            out["label"] = self.label
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Margin":
        family = family_from_json(obj)
        return cls(family=family, params=tuple(obj.get("params", [])), label=obj.get("label"))


@dataclass(frozen=True)
class TestSpec:
    """Which bootstrap test to run and with what resampling settings."""

    method: str = "npbb"  # npbb | npb | pb | spb
    correction: str = "kn"
    block_rule: str = "cube_root"
    l: int | None = None
    B: int = 1000

    def __post_init__(self):
        if self.method not in ("npbb", "npb", "pb", "spb"):
            raise ConfigError(f"unknown test method {self.method!r}")
        if self.method == "npbb" and self.correction.lower() not in ("kn", "cn"):
            raise ConfigError(f"unknown correction {self.correction!r}")

    def run(self, sample, family: Family, seed: int) -> GofResult:
        if self.method == "npbb":
            plan = BootstrapPlan(
                scheme="circular_block",
                block_rule="fixed" if self.l is not None else self.block_rule,
                l=self.l,
                B=self.B,
                seed=seed,
            )
            return npbb_test(sample, family, plan, correction=self.correction)
        if self.method == "npb":
            return npb_test(sample, family, self.B, seed)
        if self.method == "pb":
            return pb_test(sample, family, self.B, seed)
        return spb_test(sample, family, self.B, seed)

    def to_json(self) -> dict:
        out = {"method": self.method, "B": self.B}
        if self.method == "npbb":
            out["correction"] = self.correction
            out["block_rule"] = "fixed" if self.l is not None else self.block_rule
            if self.l is not None:
                out["l"] = self.l
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TestSpec":
        return cls(
            method=obj.get("method", "npbb"),
            correction=obj.get("correction", "kn"),
            block_rule=obj.get("block_rule", "cube_root"),
            l=obj.get("l"),
            B=int(obj.get("B", 1000)),
        )


def empirical_size(pvalues, alpha: float) -> float:
    """Fraction of p-values at or below the significance level."""
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    p = np.asarray(pvalues, dtype=float)
    return float(np.count_nonzero(p <= alpha) / p.size)


def summarize_qq(pvalues) -> np.ndarray:
    """Sorted p-values against uniform plotting positions ``(r - 0.5) / R``."""
    p = np.asarray(pvalues, dtype=float)
    if p.size < 2:
        raise ConfigError("need at least two p-values for a Q-Q summary")
    theoretical = (np.arange(1, p.size + 1) - 0.5) / p.size
    return np.column_stack([theoretical, np.sort(p)])


@dataclass
class CellSummary:
    """Per-replicate outcomes of one grid cell plus its rejection rates."""

    margin: str
    hypothesis: str
    tau: float
    n: int
    pvalues: np.ndarray
    t_obs: np.ndarray
    l_used: np.ndarray
    theta: np.ndarray
    sizes: dict[float, float]
    qq_points: np.ndarray
    aborts: list = field(default_factory=list)


def _hypothesis_label(family: Family) -> str:
    obj = family.to_json()
    return obj["family"] + (f"(nu={obj['nu']:g})" if "nu" in obj else "")


def _run_replicates(margin: Margin, hypothesis: Family, tau, n, test: TestSpec, seed, rs):
    """Worker body: run replicates ``rs`` of one cell, return raw rows."""
    rows = []
    for r in rs:
        path = margin.generate(n, tau, substream(seed, r, 0))
        try:
            res = test.run(path, hypothesis, derive_seed(seed, r, 1))
            diag = res.diagnostics
            rows.append(
                (int(r), res.p_value, res.t_obs, diag.get("l"), tuple(float(v) for v in res.fitted), None)
            )
        except KsbootError as exc:
            rows.append((int(r), np.nan, np.nan, None, (np.nan, np.nan), f"{type(exc).__name__}: {exc}"))
    return rows


def _run_replicates_task(args):
    return _run_replicates(*args)


def _collect_cell(margin, hypothesis, tau, n, test, R, seed, alphas, workers, pool=None):
    rs = np.arange(R)
    if workers > 1 or pool is not None:
        chunk = max(1, min(64, R // 8 or 1))
        tasks = [
            (margin, hypothesis, tau, n, test, seed, rs[lo : lo + chunk]) for lo in range(0, R, chunk)
        ]
        owns_pool = pool is None
        if owns_pool:
            pool = ProcessPoolExecutor(max_workers=workers)
        try:
            chunks = list(pool.map(_run_replicates_task, tasks))
        finally:
            if owns_pool:
                pool.shutdown()
        rows = [row for part in chunks for row in part]
    else:
        rows = _run_replicates(margin, hypothesis, tau, n, test, seed, rs)
    rows.sort(key=lambda row: row[0])

    pvals = np.array([row[1] for row in rows])
    aborts = [(row[0], row[5]) for row in rows if row[5] is not None]
    if len(aborts) > 0.005 * R:
        raise KsbootError(
            f"cell (margin={margin.name}, tau={tau}, n={n}): {len(aborts)} of {R} replicates aborted"
        )
    ok = np.isfinite(pvals)
    good = pvals[ok]
    return CellSummary(
        margin=margin.name,
        hypothesis=_hypothesis_label(hypothesis),
        tau=float(tau),
        n=int(n),
        pvalues=pvals,
        t_obs=np.array([row[2] for row in rows]),
        l_used=np.array([np.nan if row[3] is None else row[3] for row in rows]),
        theta=np.array([row[4] for row in rows]),
        sizes={float(a): empirical_size(good, a) for a in alphas},
        qq_points=summarize_qq(good) if good.size >= 2 else np.empty((0, 2)),
        aborts=aborts,
    )


def run_size_cell(
    margin: Margin, tau, n, test: TestSpec, R: int, seed: int, alphas=(0.01, 0.05, 0.10), workers: int = 1
) -> CellSummary:
    """Null-hypothesis cell: test the margin's own family on its own data."""
    if isinstance(margin.family, TruncatedBelow):
        raise ConfigError("size study needs a fittable margin family; truncated margins are power-only")
    if R < 1:
        raise ConfigError(f"replicate count must be positive, got {R}")
    return _collect_cell(margin, margin.family, tau, n, test, R, seed, alphas, workers)


def run_power_cell(
    margin: Margin,
    hypothesis: Family,
    tau,
    n,
    test: TestSpec,
    R: int,
    seed: int,
    alphas=(0.01, 0.05, 0.10),
    workers: int = 1,
) -> CellSummary:
    """Alternative-hypothesis cell: data margin differs from the tested family."""
    if hypothesis == margin.family:
        raise ConfigError("power study requires the hypothesized family to differ from the generator")
    if R < 1:
        raise ConfigError(f"replicate count must be positive, got {R}")
    return _collect_cell(margin, hypothesis, tau, n, test, R, seed, alphas, workers)


@dataclass(frozen=True)
class ExperimentGrid:
    """Cartesian design over cases x taus x ns with a fixed test config."""

    name: str
    mode: str  # "size" | "power"
    cases: tuple  # tuples (Margin, hypothesis Family or None)
    taus: tuple
    ns: tuple
    test: TestSpec
    replicates: int
    alphas: tuple = (0.01, 0.05, 0.10)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("size", "power"):
            raise ConfigError(f"mode must be 'size' or 'power', got {self.mode!r}")
        if not self.cases:
            raise ConfigError("grid needs at least one margin case")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        for tau in self.taus:
            if not abs(tau) < 1.0:
                raise ConfigError(f"tau must satisfy |tau| < 1, got {tau}")
        for n in self.ns:
            if n < 2:
                raise ConfigError(f"series length must be >= 2, got {n}")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha must lie in (0, 1), got {a}")
        for margin, hypothesis in self.cases:
            if self.mode == "power" and hypothesis is None:
                raise ConfigError("power mode requires a hypothesis family per case")
            if self.mode == "size" and hypothesis is not None and hypothesis != margin.family:
                raise ConfigError("size mode tests the margin's own family; drop the hypothesis entry")

    def cells(self):
        cell_id = 0
        for margin, hypothesis in self.cases:
            for tau in self.taus:
                for n in self.ns:
                    yield cell_id, margin, hypothesis, float(tau), int(n)
                    cell_id += 1

    def to_json(self) -> dict:
        cases = []
        for margin, hypothesis in self.cases:
            entry = {"margin": margin.to_json()}
            if hypothesis is not None:
                entry["hypothesis"] = hypothesis.to_json()
            cases.append(entry)
        return {
            "name": self.name,
            "mode": self.mode,
            "cases": cases,
            "taus": list(self.taus),
            "ns": list(self.ns),
            "test": self.test.to_json(),
            "replicates": self.replicates,
            "alphas": list(self.alphas),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentGrid":
        cases = []
        for entry in obj.get("cases", []):
            margin = Margin.from_json(entry["margin"])
            hypothesis = family_from_json(entry["hypothesis"]) if "hypothesis" in entry else None
            cases.append((margin, hypothesis))
        return cls(
            name=str(obj.get("name", "grid")),
            mode=obj.get("mode", "size"),
            cases=tuple(cases),
            taus=tuple(obj.get("taus", [0.0])),
            ns=tuple(int(n) for n in obj.get("ns", [100])),
            test=TestSpec.from_json(obj.get("test", {})),
            replicates=int(obj.get("replicates", 1000)),
            alphas=tuple(obj.get("alphas", [0.01, 0.05, 0.10])),
            seed=int(obj.get("seed", 0)),
        )

    def with_paper_scale(self) -> "ExperimentGrid":
        """Paper-scale variant: 10000 replicates, B = 1000."""
        return replace(self, replicates=10000, test=replace(self.test, B=1000))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if np.isnan(v) else repr(v)
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def run_grid(grid: ExperimentGrid, out_dir, workers: int = 1, figures: bool = True, progress=None):
    """Run every cell and emit the CSV reports, manifest, and figures.

    Returns the list of :class:`CellSummary` in cell order.  Output bytes
    depend only on the grid config and seed, never on ``workers``.
    """
    os.makedirs(out_dir, exist_ok=True)
    cells = list(grid.cells())
    summaries = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for cell_id, margin, hypothesis, tau, n in cells:
            family = hypothesis if grid.mode == "power" else margin.family
            if grid.mode == "size" and isinstance(margin.family, TruncatedBelow):
                raise ConfigError("size mode cannot fit a truncated margin family")
            if grid.mode == "power" and family == margin.family:
                raise ConfigError("power study requires the hypothesized family to differ from the generator")
            summary = _collect_cell(
                margin, family, tau, n, grid.test, grid.replicates,
                derive_seed(grid.seed, cell_id), grid.alphas, workers, pool=pool,
            )
            summaries.append(summary)
            if progress is not None:
                progress(cell_id + 1, len(cells), summary)
    finally:
        if pool is not None:
            pool.shutdown()

    prefix = f"{grid.mode}_{grid.name}"
    pvalue_rows = []
    summary_rows = []
    qq_rows = []
    for (cell_id, margin, hypothesis, tau, n), s in zip(cells, summaries):
        for r in range(grid.replicates):
            pvalue_rows.append(
                (
                    cell_id, s.margin, s.hypothesis, tau, n, r,
                    float(s.pvalues[r]), float(s.t_obs[r]),
                    None if np.isnan(s.l_used[r]) else int(s.l_used[r]),
                    float(s.theta[r, 0]), float(s.theta[r, 1]),
                )
            )
        for alpha in grid.alphas:
            summary_rows.append((cell_id, s.margin, s.hypothesis, tau, n, float(alpha), s.sizes[float(alpha)]))
        for theo, emp in s.qq_points:
            qq_rows.append((cell_id, s.margin, s.hypothesis, tau, n, float(theo), float(emp)))

    outputs = {}
    outputs["pvalues"] = os.path.join(out_dir, f"{prefix}.csv")
    _write_csv(
        outputs["pvalues"],
        ["cell", "margin", "hypothesis", "tau", "n", "r", "p", "t_obs", "l", "theta1", "theta2"],
        pvalue_rows,
    )
    outputs["summary"] = os.path.join(out_dir, "summary.csv")
    _write_csv(
        outputs["summary"],
        ["cell", "margin", "hypothesis", "tau", "n", "alpha", "rate"],
        summary_rows,
    )
    if grid.mode == "size":
        outputs["qq"] = os.path.join(out_dir, "qq.csv")
        _write_csv(
            outputs["qq"],
            ["cell", "margin", "hypothesis", "tau", "n", "theoretical", "empirical"],
            qq_rows,
        )
    else:
        outputs["power"] = os.path.join(out_dir, "power.csv")
        _write_csv(
            outputs["power"],
            ["cell", "margin", "hypothesis", "tau", "n", "alpha", "rate"],
            summary_rows,
        )

    if figures:
        from . import figures as fig

        if grid.mode == "size":
            for case_idx, (margin, _) in enumerate(grid.cases):
                case_cells = [s for s in summaries if s.margin == margin.name]
                path = os.path.join(out_dir, f"qq_{case_idx}.png")
                fig.qq_grid(case_cells, path, title=f"p-value Q-Q: {margin.name}")
                outputs[f"qq_fig_{case_idx}"] = path
        else:
            path = os.path.join(out_dir, "power_curves.png")
            fig.power_curves(summaries, path, alpha=0.05)
            outputs["power_fig"] = path

    from . import __version__

    manifest = {
        "config": grid.to_json(),
        "version": __version__,
        "outputs": {k: os.path.basename(v) for k, v in outputs.items()},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summaries
