"""Daily-returns pipeline: price ingestion, log returns, and the test battery.

The battery tests the marginal of the returns against Student-t families
over a ladder of degrees of freedom (``inf`` rows dispatch to the Normal
family), running the block-bootstrap test alongside the three baselines.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import math
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ._rng import derive_seed
from .errors import ConfigError, DataFormatError, KsbootError
from .experiments import TestSpec
from .families import Normal, StudentT

__all__ = [
    "PriceSeries",
    "load_prices",
    "log_returns",
    "bundled_snapshot_path",
    "run_table2",
    "write_table2",
]

METHODS = ("npbb", "spb", "npb", "pb")


@dataclass(frozen=True)
class PriceSeries:
    """Strictly date-ordered positive closing prices."""

    dates: tuple
    closes: np.ndarray

    def __post_init__(self):
        if len(self.dates) != self.closes.size:
            raise DataFormatError("dates and closes must have equal length")


def load_prices(path) -> PriceSeries:
    """Read a ``date,close`` CSV (ISO dates, positive decimal closes)."""
    dates: list[datetime.date] = []
    closes: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "date"):
                continue
            if len(row) < 2:
                raise DataFormatError(f"{path}:{lineno}: expected 'date,close'", line=lineno)
            try:
                date = datetime.date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad date {row[0]!r}: {exc}", line=lineno) from exc
            try:
                close = float(row[1])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad close {row[1]!r}", line=lineno) from exc
            if not math.isfinite(close) or close <= 0.0:
                raise DataFormatError(f"{path}:{lineno}: close must be positive, got {row[1]}", line=lineno)
            if dates:
                if date == dates[-1]:
                    raise DataFormatError(f"{path}:{lineno}: duplicate date {date}", line=lineno)
                if date < dates[-1]:
                    raise DataFormatError(f"{path}:{lineno}: dates out of order at {date}", line=lineno)
            dates.append(date)
            closes.append(close)
    if not dates:
        raise DataFormatError(f"{path}: no price rows found")
    return PriceSeries(dates=tuple(dates), closes=np.asarray(closes))


def log_returns(prices: PriceSeries) -> np.ndarray:
    """First differences of log closes."""
    if prices.closes.size < 2:
        raise DataFormatError("need at least two prices to form returns")
    return np.diff(np.log(prices.closes))


def bundled_snapshot_path() -> str:
    """Path of the committed returns snapshot (see its .meta.json sidecar)."""
    return str(resources.files("ksboot.data").joinpath("sp500_proxy_2020_2023.csv"))


def _family_for_nu(nu: float):
    if math.isinf(nu):
        return Normal()
    if nu <= 0:
        raise ConfigError(f"degrees of freedom must be positive or inf, got {nu}")
    return StudentT(nu=float(nu))


def run_table2(returns, nus, B: int, seed: int, block_rule: str = "cube_root",
               methods=METHODS, progress=None) -> list[dict]:
    """P-values per (nu, method) for the marginal Student-t battery.

    Each (nu, method) pair runs on its own derived seed; failures are
    recorded as ``None`` for that entry and the battery continues.
    """
    x = np.asarray(returns, dtype=float)
    if B < 1:
        raise ConfigError(f"B must be positive, got {B}")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigError(f"unknown methods {unknown}; expected subset of {METHODS}")
    rows = []
    for i, nu in enumerate(nus):
        family = _family_for_nu(float(nu))
        row: dict = {"nu": float(nu)}
        for j, method in enumerate(methods):
            spec = TestSpec(method=method, correction="kn", block_rule=block_rule, B=B)
            try:
                res = spec.run(x, family, derive_seed(seed, i, j))
                row[method] = res.p_value
                row.setdefault("l", res.diagnostics.get("l"))
            except KsbootError as exc:
                row[method] = None
                row.setdefault("errors", []).append(f"{method}: {type(exc).__name__}: {exc}")
            if progress is not None:
                progress(i, nu, method, row.get(method))
        rows.append(row)
    return rows


def _fmt_nu(nu: float) -> str:
    return "inf" if math.isinf(nu) else f"{nu:g}"


def write_table2(rows, out_dir, *, B, seed, data_path=None, methods=METHODS, figures=True) -> dict:
    """Emit table2.csv, its manifest, and the p-value figure."""
    os.makedirs(out_dir, exist_ok=True)
    table_path = os.path.join(out_dir, "table2.csv")
    with open(table_path, "w", newline="") as fh:
        fh.write("nu," + ",".join(methods) + "\n")
        for row in rows:
            cells = ["" if row.get(m) is None else repr(float(row[m])) for m in methods]
            fh.write(_fmt_nu(row["nu"]) + "," + ",".join(cells) + "\n")

    from . import __version__

    manifest = {
        "B": B,
        "seed": seed,
        "methods": list(methods),
        "block_lengths": sorted({int(r["l"]) for r in rows if r.get("l")}),
        "version": __version__,
    }
    if data_path is not None:
        digest = hashlib.sha256(open(data_path, "rb").read()).hexdigest()
        manifest["data"] = {"path": os.path.basename(str(data_path)), "sha256": digest}
    with open(os.path.join(out_dir, "table2_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    outputs = {"table": table_path}
    if figures:
        from .figures import table2_figure

        fig_path = os.path.join(out_dir, "table2.png")
        table2_figure(rows, fig_path)
        outputs["figure"] = fig_path
    return outputs
