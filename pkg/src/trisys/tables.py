"""Reproduction of the numerical-example tables.

Layout builders return both a display table (interval cells rounded to two
decimals, mirroring the reference row/column layout) and long-format
full-precision records.  The reference configuration evaluates the
instrument intersection at the two support endpoints; that is the
configuration under which every reference cell is reproduced (a finer
instrument grid gives tighter, still-valid intervals that no longer match
the reference values).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .grids import Regime, ValueGrid
from .bands import band_matrices
from .bounds import dte_bounds, joint_bounds, marginal_bounds, quantile_bounds
from .dgp import DgpSpec, build_observed_law, build_truth, default_y_grid

# True treatment-effect CDF at d = 1, 3, 5, 7, 9 in the reference design;
# the calibration gate requires the chi-squared(dof) CDF to match these
# before any table is emitted.
SHOCK_CDF_REFERENCE = (0.39, 0.78, 0.92, 0.97, 0.99)
SHOCK_CDF_DELTAS = (1.0, 3.0, 5.0, 7.0, 9.0)
CALIBRATION_TOL = 5e-3

REGIME_LABELS = {
    Regime.WORST: "Worst",
    Regime.NSM: "NSM",
    Regime.CPQD: "CPQD",
    Regime.NSM_CPQD: "NSM+CPQD",
    Regime.MTR: "MTR",
    Regime.NSM_MTR: "NSM+MTR",
}

TABLE1_Y0 = (-1.0, 1.0, 3.0, 5.0, 7.0)
TABLE1_Y1 = (-3.0, -1.0, 1.0, 3.0, 5.0, 7.0, 9.0)
TABLE23_Y = (-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0)
TABLE45_DELTA = (1.0, 3.0, 5.0, 7.0, 9.0)
TABLE0_Q = (0.25, 0.5, 0.75)
TABLE0_REGIMES = (Regime.WORST, Regime.NSM, Regime.MTR, Regime.NSM_MTR)


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TableConfig:
    rho: float = -0.75
    z_half_widths: tuple[float, ...] = (2.0, 1.5, 1.0, 0.5)
    rhos: tuple[float, ...] = (-0.25, -0.5, -0.75)
    dof: int = 2
    quantile_delta_grid: ValueGrid = field(default_factory=lambda: ValueGrid.regular(0.0, 16.0, 0.05))
    quadrature_nodes: int = 256
    dense_joint: bool = False

    def spec(self, rho: float, zbar: float) -> DgpSpec:
        return DgpSpec(rho=rho, z_half_width=zbar, dof=self.dof,
                       y_grid=default_y_grid(), delta_grid=self.quantile_delta_grid,
                       z_grid_size=2, quadrature_nodes=self.quadrature_nodes)


@dataclass(frozen=True)
class Table:
    name: str
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    records: tuple[dict, ...]

    def cell(self, row_key: tuple[str, ...], column: str) -> str:
        j = self.header.index(column)
        for row in self.rows:
            if tuple(row[: len(row_key)]) == row_key:
                return row[j]
        raise KeyError(row_key)


def calibration_gate(dof: int) -> float:
    """Worst distance between the shock CDF and its reference values.

    Raises CalibrationError beyond CALIBRATION_TOL: the tables are only
    meaningful when the shock's degrees of freedom reproduce the reference
    true treatment-effect column.
    """
    got = stats.chi2.cdf(SHOCK_CDF_DELTAS, df=dof)
    worst = float(np.abs(got - np.asarray(SHOCK_CDF_REFERENCE)).max())
    if worst > CALIBRATION_TOL:
        raise CalibrationError(
            f"chi-squared({dof}) CDF misses the reference treatment-effect values "
            f"by {worst:.4f} (> {CALIBRATION_TOL}); the table configuration is wrong")
    return worst


def pool_size() -> int:
    cap = os.environ.get("TRISYS_THREADS")
    if cap:
        try:
            return max(1, int(cap))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def fmt_value(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return f"{round(v, 2) + 0.0:.2f}"


def fmt_interval(lo: float, hi: float) -> str:
    if math.isinf(hi):
        return f"[{fmt_value(lo)}, inf)"
    return f"[{fmt_value(lo)}, {fmt_value(hi)}]"


class TableEngine:
    """Builds and caches laws, truths and bounds for the table set."""

    def __init__(self, config: TableConfig):
        self.config = config
        self._laws: dict[tuple[float, float], object] = {}

    def law(self, rho: float, zbar: float):
        key = (rho, zbar)
        if key not in self._laws:
            spec = self.config.spec(rho, zbar)
            self._laws[key] = build_observed_law(spec)
        return self._laws[key]

    def prefetch(self) -> None:
        keys = [(self.config.rho, zb) for zb in self.config.z_half_widths]
        keys += [(r, 1.0) for r in self.config.rhos if (r, 1.0) not in keys]
        keys = [k for k in keys if k not in self._laws]
        with ThreadPoolExecutor(max_workers=pool_size()) as pool:
            built = list(pool.map(lambda k: (k, build_observed_law(self.config.spec(*k))), keys))
        for k, law in built:
            self._laws[k] = law

    # -- individual tables -------------------------------------------------

    def table0(self) -> Table:
        cfg = self.config
        law = self.law(cfg.rho, 1.0)
        spec = cfg.spec(cfg.rho, 1.0)
        truth = build_truth(spec)
        bands = band_matrices(law)
        header = ("q", "quantity", "F0", "F1", "DTE")
        rows = []
        records = []
        sig = math.sqrt(1.0 + cfg.rho ** 2)
        for q in TABLE0_Q:
            t_f0 = sig * stats.norm.ppf(q)
            t_f1 = _invert(truth.f1.values, truth.f1.grid.points, q)
            t_dte = stats.chi2.ppf(q, df=cfg.dof)
            rows.append((f"{q:g}", "True", fmt_value(t_f0), fmt_value(t_f1), fmt_value(t_dte)))
            records.append({"table": "table0", "q": q, "regime": "True",
                            "F0": t_f0, "F1": t_f1, "DTE": t_dte})
            for regime in TABLE0_REGIMES:
                f0b = marginal_bounds(law, regime, "F0", bands=bands)
                f1b = marginal_bounds(law, regime, "F1", bands=bands)
                dteb = dte_bounds(law, regime, cfg.quantile_delta_grid, bands=bands)
                q_f0 = quantile_bounds(f0b, q)
                q_f1 = quantile_bounds(f1b, q)
                q_dte = quantile_bounds(dteb, q)
                rows.append((f"{q:g}", REGIME_LABELS[regime],
                             fmt_interval(q_f0.lower, q_f0.upper),
                             fmt_interval(q_f1.lower, q_f1.upper),
                             fmt_interval(q_dte.lower, q_dte.upper)))
                for target, qb in (("F0", q_f0), ("F1", q_f1), ("DTE", q_dte)):
                    records.append({"table": "table0", "q": q, "regime": REGIME_LABELS[regime],
                                    "target": target, "lower": qb.lower, "upper": qb.upper})
        return Table("table0", header, tuple(rows), tuple(records))

    def table1(self) -> Table:
        cfg = self.config
        law = self.law(cfg.rho, 1.0)
        bands = band_matrices(law)
        if cfg.dense_joint:
            ys = default_y_grid().points[::20]
            y0s, y1s = tuple(ys), tuple(ys)
        else:
            y0s, y1s = TABLE1_Y0, TABLE1_Y1
        pairs = [(a, b) for a in y0s for b in y1s]
        spec = cfg.spec(cfg.rho, 1.0)
        truth = build_truth(spec, pairs=pairs)
        header = ("y0", "quantity") + tuple(f"{b:g}" for b in y1s)
        rows = []
        records = []
        per_regime = {reg: joint_bounds(law, reg, pairs, bands=bands) for reg in Regime}
        for i, a in enumerate(y0s):
            tr = truth.joint[i * len(y1s):(i + 1) * len(y1s)]
            rows.append((f"{a:g}", "True") + tuple(fmt_value(v) for v in tr))
            for j, b in enumerate(y1s):
                records.append({"table": "table1", "y0": a, "y1": b, "regime": "True",
                                "value": float(tr[j])})
            for reg in (Regime.WORST, Regime.NSM, Regime.CPQD, Regime.NSM_CPQD,
                        Regime.MTR, Regime.NSM_MTR):
                jb = per_regime[reg]
                cells = []
                for j, b in enumerate(y1s):
                    k = i * len(y1s) + j
                    cells.append(fmt_interval(jb.lower[k], jb.upper[k]))
                    records.append({"table": "table1", "y0": a, "y1": b,
                                    "regime": REGIME_LABELS[reg],
                                    "lower": float(jb.lower[k]), "upper": float(jb.upper[k])})
                rows.append((f"{a:g}", REGIME_LABELS[reg]) + tuple(cells))
        return Table("table1", header, tuple(rows), tuple(records))

    def _marginal_table(self, name: str, target: str) -> Table:
        cfg = self.config
        header = ("y", "true") + tuple(f"zbar={zb:g}" for zb in cfg.z_half_widths)
        rows = []
        records = []
        bounds = {}
        for zb in cfg.z_half_widths:
            bounds[zb] = marginal_bounds(self.law(cfg.rho, zb), Regime.NSM_MTR, target)
        # the truth does not depend on the instrument support
        truth_cdf = build_truth(cfg.spec(cfg.rho, cfg.z_half_widths[0]))
        for y in TABLE23_Y:
            t = (truth_cdf.f0 if target == "F0" else truth_cdf.f1)(y)
            cells = []
            for zb in cfg.z_half_widths:
                lo, hi = bounds[zb].at(y)
                cells.append(fmt_interval(lo, hi))
                records.append({"table": name, "target": target, "regime": "NSM+MTR",
                                "y": y, "zbar": zb, "lower": lo, "upper": hi})
            rows.append((f"{y:g}", fmt_value(t)) + tuple(cells))
            records.append({"table": name, "target": target, "regime": "True",
                            "y": y, "value": float(t)})
        return Table(name, header, tuple(rows), tuple(records))

    def table2(self) -> Table:
        return self._marginal_table("table2", "F0")

    def table3(self) -> Table:
        return self._marginal_table("table3", "F1")

    def table4(self) -> Table:
        cfg = self.config
        dgrid = ValueGrid(np.asarray(TABLE45_DELTA))
        header = ("delta", "true") + tuple(f"zbar={zb:g}" for zb in cfg.z_half_widths)
        rows = []
        records = []
        per_zb = {zb: dte_bounds(self.law(cfg.rho, zb), Regime.NSM_MTR, dgrid)
                  for zb in cfg.z_half_widths}
        for k, d in enumerate(TABLE45_DELTA):
            t = stats.chi2.cdf(d, df=cfg.dof)
            cells = []
            for zb in cfg.z_half_widths:
                b = per_zb[zb]
                cells.append(fmt_interval(b.lower[k], b.upper[k]))
                records.append({"table": "table4", "regime": "NSM+MTR", "delta": d,
                                "zbar": zb, "lower": float(b.lower[k]),
                                "upper": float(b.upper[k])})
            rows.append((f"{d:g}", fmt_value(t)) + tuple(cells))
            records.append({"table": "table4", "regime": "True", "delta": d, "value": float(t)})
        return Table("table4", header, tuple(rows), tuple(records))

    def table5(self) -> Table:
        cfg = self.config
        dgrid = ValueGrid(np.asarray(TABLE45_DELTA))
        header = ("delta", "true") + tuple(f"rho={r:g}" for r in cfg.rhos)
        rows = []
        records = []
        per_rho = {r: dte_bounds(self.law(r, 1.0), Regime.NSM_MTR, dgrid) for r in cfg.rhos}
        for k, d in enumerate(TABLE45_DELTA):
            t = stats.chi2.cdf(d, df=cfg.dof)
            cells = []
            for r in cfg.rhos:
                b = per_rho[r]
                cells.append(fmt_interval(b.lower[k], b.upper[k]))
                records.append({"table": "table5", "regime": "NSM+MTR", "delta": d,
                                "rho": r, "lower": float(b.lower[k]),
                                "upper": float(b.upper[k])})
            rows.append((f"{d:g}", fmt_value(t)) + tuple(cells))
            records.append({"table": "table5", "regime": "True", "delta": d, "value": float(t)})
        return Table("table5", header, tuple(rows), tuple(records))

    def all_tables(self) -> list[Table]:
        calibration_gate(self.config.dof)
        self.prefetch()
        return [self.table0(), self.table1(), self.table2(), self.table3(),
                self.table4(), self.table5()]


def _invert(values: np.ndarray, points: np.ndarray, q: float) -> float:
    i = int(np.searchsorted(values, q - 1e-9))
    return float(points[i]) if i < len(points) else float("inf")
