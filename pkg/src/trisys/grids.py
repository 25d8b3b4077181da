"""Discretized probability objects: value grids, step CDFs, observed laws.

Everything downstream consumes these.  A CDF lives on a finite, strictly
increasing value grid and is evaluated as a right-continuous step function:
the value at a query point is the value at the largest grid point <= query,
0 below the grid, and the last value above it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

CLAMP_TOL = 1e-12  # probabilities may drift past [0,1] by at most this much


class Regime(str, Enum):
    """Restriction regime under which bounds are assembled."""

    WORST = "WORST"
    NSM = "NSM"
    CPQD = "CPQD"
    MTR = "MTR"
    NSM_CPQD = "NSM_CPQD"
    NSM_MTR = "NSM_MTR"

    @property
    def needs_interior_propensity(self) -> bool:
        # CPQD-containing regimes require the propensity bounded away from 0 and 1.
        return self in (Regime.CPQD, Regime.NSM_CPQD)

    @property
    def uses_nsm(self) -> bool:
        return self in (Regime.NSM, Regime.NSM_CPQD, Regime.NSM_MTR)

    @property
    def uses_mtr(self) -> bool:
        return self in (Regime.MTR, Regime.NSM_MTR)


REGIMES: tuple[Regime, ...] = tuple(Regime)


def _as_float_array(values: Iterable[float]) -> np.ndarray:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ValueGrid:
    """Strictly increasing finite grid of outcome (or effect) values."""

    points: np.ndarray

    def __post_init__(self):
        pts = _as_float_array(self.points)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def regular(cls, lo: float, hi: float, step: float) -> "ValueGrid":
        n = int(round((hi - lo) / step))
        return cls(np.linspace(lo, hi, n + 1))

    @property
    def step(self) -> float:
        """Representative spacing (median of the increments)."""
        return float(np.median(np.diff(self.points)))

    def __len__(self) -> int:
        return len(self.points)

    def locate(self, y) -> np.ndarray:
        """Index of the largest grid point <= y; -1 below the grid.

        Queries within 1e-9 of a grid point count as at the point, so grid
        values built by inexact float arithmetic still evaluate exactly.
        """
        return np.searchsorted(self.points, np.asarray(y, dtype=float) + 1e-9, side="right") - 1

    def index_of(self, y: float) -> int:
        """Exact index of a grid value (tolerant to float noise)."""
        i = int(np.clip(self.locate(y + 1e-9), 0, len(self) - 1))
        if abs(self.points[i] - y) > 1e-6:
            raise KeyError(f"{y} is not a grid point")
        return i


@dataclass(frozen=True)
class StepCdf:
    """Nondecreasing right-continuous CDF on a value grid."""

    grid: ValueGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _as_float_array(self.values)
        if vals.shape != self.grid.points.shape:
            raise ValueError("values must align with the grid")
        object.__setattr__(self, "values", vals)

    def __call__(self, y):
        return eval_cdf(self, y)

    def is_valid(self, tol: float = CLAMP_TOL) -> bool:
        v = self.values
        return bool(np.all(v >= -tol) and np.all(v <= 1 + tol) and np.all(np.diff(v) >= -tol))


def eval_cdf(cdf: StepCdf, y):
    """Step evaluation: value at the largest grid point <= y, 0 below the grid."""
    idx = cdf.grid.locate(y)
    scalar = np.ndim(idx) == 0
    idx = np.atleast_1d(idx)
    out = np.where(idx < 0, 0.0, cdf.values[np.clip(idx, 0, len(cdf.grid) - 1)])
    return float(out[0]) if scalar else out


def monotone_envelope(values: Sequence[float], direction: str) -> np.ndarray:
    """Closest nondecreasing sequence to `values` after clamping to [0, 1].

    direction="lower": smallest nondecreasing sequence >= clamped input
    (running maximum).  direction="upper": largest nondecreasing sequence
    <= clamped input (running minimum taken from the right).
    """
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    if direction == "lower":
        return np.maximum.accumulate(v)
    if direction == "upper":
        return np.minimum.accumulate(v[::-1])[::-1]
    raise ValueError(f"direction must be 'lower' or 'upper', got {direction!r}")


def _label_key(label: str):
    try:
        return (0, float(label))
    except (TypeError, ValueError):
        return (1, str(label))


@dataclass(frozen=True)
class ObservedLaw:
    """The identified data object the bounds engine consumes.

    Conditional CDFs are stored arm-wise as (nz, ny) matrices aligned with
    `z_labels`; `cond0[i]` is P(Y <= y | D=0, Z=z_i) on the y grid and
    `cond1[i]` the D=1 arm.  The extreme-propensity rows play the role of the
    limit laws at the propensity sup/inf; ties go to the smallest z label.
    """

    y_grid: ValueGrid
    z_labels: tuple[str, ...]
    propensity: np.ndarray
    cond0: np.ndarray
    cond1: np.ndarray

    def __post_init__(self):
        labels = tuple(str(z) for z in self.z_labels)
        p = _as_float_array(self.propensity)
        c0 = np.array(self.cond0, dtype=float, copy=True)
        c1 = np.array(self.cond1, dtype=float, copy=True)
        c0.setflags(write=False)
        c1.setflags(write=False)
        if len(labels) == 0:
            raise ValueError("need at least one instrument value")
        if p.shape != (len(labels),):
            raise ValueError("propensity must align with z_labels")
        ny = len(self.y_grid)
        if c0.shape != (len(labels), ny) or c1.shape != (len(labels), ny):
            raise ValueError("conditional CDF matrices must be (n_z, n_y)")
        object.__setattr__(self, "z_labels", labels)
        object.__setattr__(self, "propensity", p)
        object.__setattr__(self, "cond0", c0)
        object.__setattr__(self, "cond1", c1)

    # -- extreme-propensity structure ------------------------------------

    def _arg_extreme(self, which: str) -> int:
        p = self.propensity
        target = p.max() if which == "max" else p.min()
        tied = [i for i in range(len(p)) if abs(p[i] - target) <= CLAMP_TOL]
        return min(tied, key=lambda i: _label_key(self.z_labels[i]))

    @property
    def i_bar(self) -> int:
        """Index of the z attaining the largest propensity."""
        return self._arg_extreme("max")

    @property
    def i_low(self) -> int:
        """Index of the z attaining the smallest propensity."""
        return self._arg_extreme("min")

    @property
    def p_bar(self) -> float:
        return float(self.propensity[self.i_bar])

    @property
    def p_low(self) -> float:
        return float(self.propensity[self.i_low])

    def cond_cdf(self, d: int, z: str) -> StepCdf:
        i = self.z_index(z)
        mat = self.cond1 if d == 1 else self.cond0
        return StepCdf(self.y_grid, mat[i])

    @property
    def limit_cdf_at_pbar(self) -> tuple[StepCdf, StepCdf]:
        i = self.i_bar
        return StepCdf(self.y_grid, self.cond0[i]), StepCdf(self.y_grid, self.cond1[i])

    @property
    def limit_cdf_at_plow(self) -> tuple[StepCdf, StepCdf]:
        i = self.i_low
        return StepCdf(self.y_grid, self.cond0[i]), StepCdf(self.y_grid, self.cond1[i])

    def z_index(self, z: str) -> int:
        try:
            return self.z_labels.index(str(z))
        except ValueError:
            raise KeyError(f"unknown instrument value {z!r}") from None

    @property
    def n_z(self) -> int:
        return len(self.z_labels)

    # -- sub-distribution views used by the bounds engine -----------------

    @property
    def sub0(self) -> np.ndarray:
        """P(y, D=0 | z) = P(y|0,z) * (1 - p(z)), shape (nz, ny)."""
        return self.cond0 * (1.0 - self.propensity)[:, None]

    @property
    def sub1(self) -> np.ndarray:
        """P(y, D=1 | z) = P(y|1,z) * p(z), shape (nz, ny)."""
        return self.cond1 * self.propensity[:, None]


@dataclass(frozen=True)
class Violation:
    invariant: str
    d: int | None = None
    z: str | None = None
    y_index: int | None = None
    message: str = ""

    def __str__(self) -> str:
        where = ", ".join(
            s for s in (
                f"d={self.d}" if self.d is not None else "",
                f"z={self.z}" if self.z is not None else "",
                f"y_index={self.y_index}" if self.y_index is not None else "",
            ) if s
        )
        return f"{self.invariant}[{where}]: {self.message}"


def validate_observed_law(law: ObservedLaw, tol: float = CLAMP_TOL) -> list[Violation]:
    """Report every invariant violation; an empty list means the law is valid."""
    out: list[Violation] = []
    pts = law.y_grid.points
    if not np.all(np.diff(pts) > 0):
        out.append(Violation("y_grid_increasing", message="y grid is not strictly increasing"))
    for i, z in enumerate(law.z_labels):
        p = law.propensity[i]
        if not (-tol <= p <= 1 + tol):
            out.append(Violation("propensity_range", z=z, message=f"p(z)={p} outside [0, 1]"))
    for d, mat in ((0, law.cond0), (1, law.cond1)):
        for i, z in enumerate(law.z_labels):
            row = mat[i]
            bad = np.where((row < -tol) | (row > 1 + tol))[0]
            if bad.size:
                j = int(bad[0])
                out.append(Violation("cdf_range", d=d, z=z, y_index=j,
                                     message=f"value {row[j]} outside [0, 1]"))
            drops = np.where(np.diff(row) < -tol)[0]
            if drops.size:
                j = int(drops[0]) + 1
                out.append(Violation("nondecreasing", d=d, z=z, y_index=j,
                                     message=f"value decreases at index {j}"))
    if not out:
        # limit laws must be the conditional CDFs at the extreme-propensity z
        for which, i in (("pbar", law.i_bar), ("plow", law.i_low)):
            target = law.p_bar if which == "pbar" else law.p_low
            if abs(law.propensity[i] - target) > tol:
                out.append(Violation(f"limit_law_{which}", z=law.z_labels[i],
                                     message="limit law does not sit at the extreme propensity"))
    return out


# -- JSON observables schema ----------------------------------------------
#
# {"y_grid": [...], "z_grid": [...], "propensity": {z: p},
#  "cdf0": {z: [...]}, "cdf1": {z: [...]}}
# Arrays are grid-aligned.  Schema violations raise SchemaError carrying the
# validation report.


class SchemaError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations) or "invalid observables")


def law_to_dict(law: ObservedLaw) -> dict:
    return {
        "y_grid": law.y_grid.points.tolist(),
        "z_grid": list(law.z_labels),
        "propensity": {z: float(law.propensity[i]) for i, z in enumerate(law.z_labels)},
        "cdf0": {z: law.cond0[i].tolist() for i, z in enumerate(law.z_labels)},
        "cdf1": {z: law.cond1[i].tolist() for i, z in enumerate(law.z_labels)},
    }


def law_from_dict(doc: Mapping) -> ObservedLaw:
    problems: list[Violation] = []
    for key in ("y_grid", "z_grid", "propensity", "cdf0", "cdf1"):
        if key not in doc:
            problems.append(Violation("schema", message=f"missing field {key!r}"))
    if problems:
        raise SchemaError(problems)
    try:
        grid = ValueGrid(np.asarray(doc["y_grid"], dtype=float))
    except (ValueError, TypeError) as exc:
        raise SchemaError([Violation("y_grid", message=str(exc))]) from exc
    labels = [str(z) for z in doc["z_grid"]]
    if len(labels) != len(set(labels)):
        raise SchemaError([Violation("z_grid", message="duplicate instrument labels")])
    prop, c0, c1 = [], [], []
    ny = len(grid)
    for z in labels:
        for name, store in (("propensity", prop),):
            try:
                store.append(float(doc[name][z]))
            except (KeyError, TypeError, ValueError):
                problems.append(Violation(name, z=z, message=f"missing or non-numeric {name}"))
        for name, store in (("cdf0", c0), ("cdf1", c1)):
            try:
                row = np.asarray(doc[name][z], dtype=float)
            except (KeyError, TypeError, ValueError):
                problems.append(Violation(name, z=z, message=f"missing or malformed {name} array"))
                continue
            if row.shape != (ny,):
                problems.append(Violation(name, z=z, message=f"{name} not grid-aligned "
                                          f"({row.shape[0] if row.ndim == 1 else '?'} vs {ny})"))
                continue
            store.append(row)
    if problems:
        raise SchemaError(problems)
    law = ObservedLaw(grid, tuple(labels), np.asarray(prop), np.vstack(c0), np.vstack(c1))
    report = validate_observed_law(law)
    if report:
        raise SchemaError(report)
    return law


def law_from_json(path) -> ObservedLaw:
    with open(path) as fh:
        return law_from_dict(json.load(fh))


def law_to_json(law: ObservedLaw, path) -> None:
    with open(path, "w") as fh:
        json.dump(law_to_dict(law), fh)
