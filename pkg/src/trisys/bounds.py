"""Sharp population bounds assembled from counterfactual bands.

Each bound combines, within every instrument value z, the observed arm-wise
sub-distributions with the regime's counterfactual bands, then intersects
across z (sup of lower bounds, inf of upper bounds).  The arm sums are formed
before the intersection; intersecting per arm first would not be valid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grids import ObservedLaw, Regime, StepCdf, ValueGrid, monotone_envelope
from .bands import BandSet, band_matrices
from .copulas import DteBound, chain_sup, shift_indices

CPQD_MARGIN = 1e-6  # propensity distance from {0, 1} required by quadrant-dependence regimes


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class MarginalBound:
    target: str                 # "F0" or "F1"
    regime: Regime
    grid: ValueGrid
    lower: np.ndarray
    upper: np.ndarray

    def at(self, y: float) -> tuple[float, float]:
        return (
            float(StepCdf(self.grid, self.lower)(y)),
            float(StepCdf(self.grid, self.upper)(y)),
        )


@dataclass(frozen=True)
class JointBound:
    regime: Regime
    pairs: tuple[tuple[float, float], ...]
    lower: np.ndarray
    upper: np.ndarray
    raw_lower: np.ndarray
    raw_upper: np.ndarray


@dataclass(frozen=True)
class QuantileBound:
    target: str                 # "F0", "F1" or "DTE"
    q: float
    lower: float
    upper: float                # may be +inf when the lower CDF bound never reaches q


def _check_regime(law: ObservedLaw, regime: Regime) -> None:
    regime = Regime(regime)
    if regime.needs_interior_propensity:
        if law.p_low <= CPQD_MARGIN or law.p_bar >= 1.0 - CPQD_MARGIN:
            raise ConfigurationError(
                f"{regime.value} requires the propensity bounded away from 0 and 1; "
                f"got [{law.p_low}, {law.p_bar}]")


def marginal_bounds(law: ObservedLaw, regime: Regime, target: str,
                    bands: BandSet | None = None) -> MarginalBound:
    """Pointwise-sharp bounds on the marginal CDF of Y0 or Y1.

    F_d^L(y) = sup_z [observed arm term + regime lower band], F_d^U the inf
    with the upper band; under quadrant dependence the marginals coincide with
    the worst case, which the band selection reproduces bitwise.
    """
    regime = Regime(regime)
    _check_regime(law, regime)
    if target not in ("F0", "F1"):
        raise ValueError(f"target must be 'F0' or 'F1', got {target!r}")
    bs = bands if bands is not None else band_matrices(law)
    l01, u01, l10, u10 = bs.select(regime)
    if target == "F0":
        obs, lo_band, hi_band = law.sub0, l01, u01
    else:
        obs, lo_band, hi_band = law.sub1, l10, u10
    lower = monotone_envelope((obs + lo_band).max(axis=0), "lower")
    upper = monotone_envelope((obs + hi_band).min(axis=0), "upper")
    return MarginalBound(target, regime, law.y_grid, lower, upper)


def _eval_rows(mat: np.ndarray, grid: ValueGrid, y: float) -> np.ndarray:
    """Step evaluation of every z-row at one y (0 below the grid)."""
    i = int(grid.locate(y))
    if i < 0:
        return np.zeros(mat.shape[0])
    return mat[:, min(i, len(grid) - 1)]


def joint_bounds(law: ObservedLaw, regime: Regime,
                 pairs: Sequence[tuple[float, float]],
                 bands: BandSet | None = None) -> JointBound:
    """Bounds on the joint CDF P(Y0 <= y0, Y1 <= y1) at the query pairs.

    Worst-case and stochastic-monotonicity regimes take the two-marginal
    bounds arm by arm and add them; quadrant-dependence regimes replace the
    arm lower bounds by the product form; monotone-treatment-response regimes
    use the pinned-diagonal construction for y0 < y1 and collapse to the F1
    bounds for y0 >= y1.
    """
    regime = Regime(regime)
    _check_regime(law, regime)
    bs = bands if bands is not None else band_matrices(law)
    l01, u01, l10, u10 = bs.select(regime)
    sub0, sub1 = law.sub0, law.sub1
    p = law.propensity
    grid = law.y_grid
    n = len(grid)

    f1_bound = marginal_bounds(law, regime, "F1", bands=bs) if regime.uses_mtr else None

    raw_lo = np.empty(len(pairs))
    raw_hi = np.empty(len(pairs))
    for k, (y0, y1) in enumerate(pairs):
        s0_y0 = _eval_rows(sub0, grid, y0)
        s1_y1 = _eval_rows(sub1, grid, y1)
        u01_y0 = _eval_rows(u01, grid, y0)
        u10_y1 = _eval_rows(u10, grid, y1)
        if regime.uses_mtr:
            if y0 >= y1:
                raw_lo[k], raw_hi[k] = f1_bound.at(y1)
                continue
            j0 = max(int(grid.locate(y0)), 0)
            j1 = int(grid.locate(y1))
            if j1 < 0:
                arm0 = np.zeros(law.n_z)
                arm1 = np.zeros(law.n_z)
            else:
                sl = slice(j0, min(j1, n - 1) + 1)
                arm0 = ((s0_y0[:, None] - sub0[:, sl]) + l10[:, sl]).max(axis=1)
                l01_y0 = _eval_rows(l01, grid, y0)
                arm1 = (l01_y0[:, None] - u01[:, sl] + sub1[:, sl]).max(axis=1)
            lo_z = np.maximum(arm0, 0.0) + np.maximum(arm1, 0.0)
            hi_z = np.minimum(s0_y0, u10_y1) + np.minimum(u01_y0, s1_y1)
        elif regime in (Regime.CPQD, Regime.NSM_CPQD):
            c0_y0 = _eval_rows(law.cond0, grid, y0)
            c1_y1 = _eval_rows(law.cond1, grid, y1)
            l10_y1 = _eval_rows(l10, grid, y1)
            l01_y0 = _eval_rows(l01, grid, y0)
            lo_z = c0_y0 * l10_y1 + l01_y0 * c1_y1
            hi_z = np.minimum(s0_y0, u10_y1) + np.minimum(u01_y0, s1_y1)
        else:
            l10_y1 = _eval_rows(l10, grid, y1)
            l01_y0 = _eval_rows(l01, grid, y0)
            lo_z = (np.maximum(s0_y0 + l10_y1 - (1.0 - p), 0.0)
                    + np.maximum(l01_y0 + s1_y1 - p, 0.0))
            hi_z = np.minimum(s0_y0, u10_y1) + np.minimum(u01_y0, s1_y1)
        raw_lo[k] = lo_z.max()
        raw_hi[k] = hi_z.min()
    return JointBound(regime, tuple((float(a), float(b)) for a, b in pairs),
                      np.clip(raw_lo, 0.0, 1.0), np.clip(raw_hi, 0.0, 1.0),
                      raw_lo, raw_hi)


def _mak_rows_lower(points, g1_rows, g0_rows, delta):
    i1, i0 = shift_indices(points, delta)
    return np.maximum((g1_rows[:, i1] - g0_rows[:, i0]).max(axis=1), 0.0)


def _mak_rows_upper(points, g1_rows, g0_rows, delta):
    i1, i0 = shift_indices(points, delta)
    return np.minimum((g1_rows[:, i1] - g0_rows[:, i0]).min(axis=1), 0.0)


def dte_bounds(law: ObservedLaw, regime: Regime, delta_grid: ValueGrid,
               bands: BandSet | None = None) -> DteBound:
    """Bounds on P(Y1 - Y0 <= d) over a grid of d values.

    Per z the two treatment arms contribute a difference-CDF kernel each
    (the shifted sup/inf form in general; the chain program for the lower
    bound under monotone treatment response, which also forces both bounds to
    0 for d < 0).  Arm contributions are summed within z, intersected across
    z, rearranged to be monotone, and clamped.
    """
    regime = Regime(regime)
    _check_regime(law, regime)
    bs = bands if bands is not None else band_matrices(law)
    l01, u01, l10, u10 = bs.select(regime)
    sub0, sub1 = law.sub0, law.sub1
    pts = law.y_grid.points
    mtr = regime.uses_mtr

    raw_lo = np.empty(len(delta_grid))
    raw_hi = np.empty(len(delta_grid))
    for k, d in enumerate(delta_grid.points):
        d = float(d)
        if mtr and d < 0:
            raw_lo[k] = 0.0
            raw_hi[k] = 0.0
            continue
        if mtr:
            lo_z = np.array([
                chain_sup(pts, sub1[i], u01[i], d) + chain_sup(pts, l10[i], sub0[i], d)
                for i in range(law.n_z)
            ])
        else:
            lo_z = (_mak_rows_lower(pts, sub1, u01, d)
                    + _mak_rows_lower(pts, l10, sub0, d))
        hi_z = 1.0 + (_mak_rows_upper(pts, sub1, l01, d)
                      + _mak_rows_upper(pts, u10, sub0, d))
        raw_lo[k] = lo_z.max()
        raw_hi[k] = hi_z.min()
    return DteBound.from_raw(delta_grid, raw_lo, raw_hi)


def quantile_bounds(bound: MarginalBound | DteBound, q: float) -> QuantileBound:
    """Invert CDF bounds into bounds on the q-quantile.

    The interval is [inf{y: upper(y) >= q}, inf{y: lower(y) >= q}]; when the
    lower CDF bound never reaches q the right end is +inf.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must be in (0, 1), got {q}")
    if isinstance(bound, MarginalBound):
        target, grid, lower, upper = bound.target, bound.grid, bound.lower, bound.upper
    elif isinstance(bound, DteBound):
        target, grid, lower, upper = "DTE", bound.delta_grid, bound.lower, bound.upper
    else:
        raise TypeError(f"cannot invert {type(bound).__name__}")

    def inv(vals: np.ndarray) -> float:
        i = int(np.searchsorted(vals, q - 1e-9, side="left"))
        return float(grid.points[i]) if i < len(vals) else float("inf")

    return QuantileBound(target, float(q), inv(upper), inv(lower))
