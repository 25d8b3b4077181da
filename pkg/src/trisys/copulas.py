"""Classical bounds for fixed marginals, on step-function CDFs.

Contains the joint-CDF bounds given marginals, the sum/difference-CDF bounds,
the point-constrained refinement, the bounds under a monotone treatment
response (support restriction Y1 >= Y0), and the chain dynamic program that
computes the sharp lower bound on P(Y1 - Y0 <= d) under that restriction.

All sup/inf over the real line are evaluated on step-function breakpoints:
for two step functions with jump points on `points` and `points + delta`, the
difference is constant between consecutive breakpoints, so scanning the
breakpoints is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .grids import ValueGrid, StepCdf, eval_cdf, monotone_envelope

_IDX_SLACK = 1e-9  # protects breakpoint shifts against float round-off


@dataclass(frozen=True)
class MarginalPair:
    """Two marginal CDFs on a shared value grid."""

    f0: StepCdf
    f1: StepCdf

    def __post_init__(self):
        if self.f0.grid.points.shape != self.f1.grid.points.shape or \
                not np.array_equal(self.f0.grid.points, self.f1.grid.points):
            raise ValueError("marginals must share one value grid")

    @property
    def grid(self) -> ValueGrid:
        return self.f0.grid


@dataclass(frozen=True)
class DteBound:
    """Pointwise bounds on P(Y1 - Y0 <= d) over a grid of d values.

    `lower`/`upper` are the reported bounds (monotone, clamped to [0, 1]);
    `raw_lower`/`raw_upper` keep the pre-clamp values, which the diagnostics
    need: a raw lower bound crossing the raw upper (or exceeding 1) is the
    refutation signal for the monotone-treatment-response restriction.
    """

    delta_grid: ValueGrid
    lower: np.ndarray
    upper: np.ndarray
    raw_lower: np.ndarray
    raw_upper: np.ndarray

    @classmethod
    def from_raw(cls, delta_grid: ValueGrid, raw_lower, raw_upper) -> "DteBound":
        raw_lower = np.asarray(raw_lower, dtype=float)
        raw_upper = np.asarray(raw_upper, dtype=float)
        return cls(
            delta_grid,
            monotone_envelope(raw_lower, "lower"),
            monotone_envelope(raw_upper, "upper"),
            raw_lower,
            raw_upper,
        )


# ---------------------------------------------------------------------------
# breakpoint machinery


def shift_indices(points: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Index maps evaluating G1(y) and G0(y - delta) at every breakpoint.

    Breakpoints are `points`, `points + delta`, and one sentinel below
    everything; indices are clamped to the array ends, i.e. a step array is
    extended as a constant beyond its grid.
    """
    b = np.concatenate((points, points + delta, [min(points[0], points[0] + delta) - 1.0]))
    n = len(points)
    i1 = np.clip(np.searchsorted(points, b + _IDX_SLACK, side="right") - 1, 0, n - 1)
    i0 = np.clip(np.searchsorted(points, (b - delta) + _IDX_SLACK, side="right") - 1, 0, n - 1)
    return i1, i0


def sup_pos_diff(points: np.ndarray, g1: np.ndarray, g0: np.ndarray, delta: float) -> float:
    """sup over y of max(G1(y) - G0(y - delta), 0), arrays extended as constants."""
    i1, i0 = shift_indices(points, delta)
    return float(max((g1[i1] - g0[i0]).max(), 0.0))


def inf_neg_diff(points: np.ndarray, g1: np.ndarray, g0: np.ndarray, delta: float) -> float:
    """inf over y of min(G1(y) - G0(y - delta), 0), arrays extended as constants."""
    i1, i0 = shift_indices(points, delta)
    return float(min((g1[i1] - g0[i0]).min(), 0.0))


# ---------------------------------------------------------------------------
# chain dynamic program
#
# Feasible chains are nondecreasing sequences with consecutive gaps in
# [0, delta]; the objective adds max(G1(a_{k+1}) - G0(a_k), 0) per link.  On a
# grid this is a longest-path problem on a DAG: best(j) is the best value of a
# chain ending at grid point j, obtained from any predecessor i in the delta
# window (zero-valued links let chains bridge any distance, so no
# reachability constraint survives beyond the per-link window).  Each grid
# point may additionally carry one zero-gap self-link; with valid inputs
# (G1 <= G0 pointwise) self-links contribute nothing, while on
# dominance-violating inputs they keep the diagnostic signal finite (the
# unconstrained supremum would be +inf by repeating one violating point).


@njit(cache=True)
def _chain_best(yp, g1, g0, delta, slack):  # pragma: no cover - numba
    n = yp.size
    best = np.zeros(n)
    q1 = np.empty(n, np.int64)
    q2 = np.empty(n, np.int64)
    q1h = q1t = q2h = q2t = 0
    ans = 0.0
    for j in range(n):
        while q1h < q1t and yp[j] - yp[q1[q1h]] > delta + slack:
            q1h += 1
        while q2h < q2t and yp[j] - yp[q2[q2h]] > delta + slack:
            q2h += 1
        b = 0.0
        if q1h < q1t:
            c = best[q1[q1h]] - g0[q1[q1h]] + g1[j]
            if c > b:
                b = c
        if q2h < q2t:
            c = best[q2[q2h]]
            if c > b:
                b = c
        s = g1[j] - g0[j]
        if s > 0.0:
            b += s
        best[j] = b
        if b > ans:
            ans = b
        key = b - g0[j]
        while q1h < q1t and best[q1[q1t - 1]] - g0[q1[q1t - 1]] <= key:
            q1t -= 1
        q1[q1t] = j
        q1t += 1
        while q2h < q2t and best[q2[q2t - 1]] <= b:
            q2t -= 1
        q2[q2t] = j
        q2t += 1
    return ans


def chain_support(points: np.ndarray, g1: np.ndarray, g0: np.ndarray, delta: float,
                  pad_low: tuple[float, float] | None, pad_high: tuple[float, float] | None):
    """Chain-point set and step values shared by the DP and its enumeration oracle.

    Chains may use the grid and the grid shifted by delta (so a two-point
    chain can reproduce every breakpoint pair the shifted sup/inf kernels
    evaluate), plus one padding point on each side.  Pads default to the
    arrays' end values (the step functions' asymptotes); distribution-level
    callers pass ``pad_low=(0, 0)`` and ``pad_high=(1, 1)``.
    """
    n = len(points)
    merged = np.sort(np.concatenate((points, points + delta))) if delta > 0 else points
    idx = np.clip(np.searchsorted(points, merged + _IDX_SLACK, side="right") - 1, 0, n - 1)
    v1 = g1[idx]
    v0 = g0[idx]
    step = float(np.median(np.diff(points)))
    lo1, lo0 = pad_low if pad_low is not None else (g1[0], g0[0])
    hi1, hi0 = pad_high if pad_high is not None else (g1[-1], g0[-1])
    yp = np.concatenate(([merged[0] - step], merged, [merged[-1] + step]))
    a1 = np.concatenate(([lo1], v1, [hi1]))
    a0 = np.concatenate(([lo0], v0, [hi0]))
    return yp, a1, a0


def chain_sup(points: np.ndarray, g1: np.ndarray, g0: np.ndarray, delta: float,
              pad_low: tuple[float, float] | None = None,
              pad_high: tuple[float, float] | None = None) -> float:
    """Best chain value for the window `delta`; 0 for negative `delta`."""
    if delta < 0:
        return 0.0
    yp, a1, a0 = chain_support(points, g1, g0, float(delta), pad_low, pad_high)
    return float(_chain_best(yp, a1, a0, float(delta), _IDX_SLACK))


# ---------------------------------------------------------------------------
# fixed-marginal bounds


def frechet_hoeffding(m: MarginalPair, y0: float, y1: float) -> tuple[float, float]:
    """Sharp bounds on P(Y0 <= y0, Y1 <= y1) with no dependence restriction.

    The lower end is attained under perfectly negative dependence, the upper
    under perfectly positive dependence.
    """
    u = eval_cdf(m.f0, y0)
    v = eval_cdf(m.f1, y1)
    return max(u + v - 1.0, 0.0), min(u, v)


class InfeasibleThetaError(ValueError):
    """The pinned joint-CDF value is outside its admissible range."""


def nelsen_constrained(m: MarginalPair, a0: float, a1: float, theta: float,
                       y0: float, y1: float) -> tuple[float, float]:
    """Joint-CDF bounds when the joint CDF is known at one point.

    Given F(a0, a1) = theta, the bounds at (y0, y1) tighten to

        max{0, F0(a0)+F1(a1)-1, theta - (F0(a0)-F0(y0))+ - (F1(a1)-F1(y1))+}
        min{F0(y0), F1(y1), theta + (F0(y0)-F0(a0))+ + (F1(y1)-F1(a1))+}

    and remain sharp; they nest inside the unconstrained bounds.
    """
    fa0 = eval_cdf(m.f0, a0)
    fa1 = eval_cdf(m.f1, a1)
    lo_adm = max(fa0 + fa1 - 1.0, 0.0)
    hi_adm = min(fa0, fa1)
    tol = 1e-12
    if theta < lo_adm - tol:
        raise InfeasibleThetaError(
            f"theta={theta} below the admissible lower end max(F0(a0)+F1(a1)-1, 0)={lo_adm}")
    if theta > hi_adm + tol:
        raise InfeasibleThetaError(
            f"theta={theta} above the admissible upper end min(F0(a0), F1(a1))={hi_adm}")
    u = eval_cdf(m.f0, y0)
    v = eval_cdf(m.f1, y1)
    pos = lambda x: max(x, 0.0)
    lo = max(0.0, u + v - 1.0, theta - pos(fa0 - u) - pos(fa1 - v))
    hi = min(u, v, theta + pos(u - fa0) + pos(v - fa1))
    return lo, hi


def makarov_dte(m: MarginalPair, delta_grid: ValueGrid) -> DteBound:
    """Sharp bounds on P(Y1 - Y0 <= d) with no dependence restriction.

    lower(d) = sup_y max(F1(y) - F0(y-d), 0)
    upper(d) = 1 + inf_y min(F1(y) - F0(y-d), 0)

    evaluated on the union of both grids shifted by d, padded so that the
    step CDFs read 0 below and 1 above their grids.
    """
    pts, g1v, g0v = _padded_distribution(m)
    lo = np.array([sup_pos_diff(pts, g1v, g0v, d) for d in delta_grid.points])
    hi = np.array([1.0 + inf_neg_diff(pts, g1v, g0v, d) for d in delta_grid.points])
    return DteBound.from_raw(delta_grid, lo, hi)


def _padded_distribution(m: MarginalPair):
    """Grid and values padded with a (0,0) point below and a (1,1) point above."""
    pts = m.grid.points
    step = m.grid.step
    padded = np.concatenate(([pts[0] - step], pts, [pts[-1] + step]))
    g1 = np.concatenate(([0.0], m.f1.values, [1.0]))
    g0 = np.concatenate(([0.0], m.f0.values, [1.0]))
    return padded, g1, g0


def mtr_joint_bounds(m: MarginalPair, y0: float, y1: float) -> tuple[float, float]:
    """Joint-CDF bounds when Y1 >= Y0 almost surely.

    The support restriction pins F(y, y) = F1(y), so for y0 < y1

        lower = sup_{y0 <= y <= y1} {F1(y) - F0(y) + F0(y0)}
        upper = min(F0(y0), F1(y1))

    and for y0 >= y1 the joint CDF equals F1(y1) exactly.  Requires F1 <= F0
    pointwise to be meaningful; when that dominance fails the raw values are
    returned anyway (lower may exceed upper) so diagnostics can flag it.
    """
    if y0 >= y1:
        v = eval_cdf(m.f1, y1)
        return v, v
    f0v, f1v = m.f0.values, m.f1.values
    base = eval_cdf(m.f0, y0)
    # candidates: the y0 endpoint itself, plus every grid point in (y0, y1]
    lo = eval_cdf(m.f1, y0)
    j0 = max(int(m.grid.locate(y0)), 0)
    j1 = int(m.grid.locate(y1))
    if j1 >= 0:
        j1 = min(j1, len(m.grid) - 1)
        seg = f1v[j0:j1 + 1] - f0v[j0:j1 + 1]
        lo = max(lo, float(seg.max()) + base)
    hi = min(base, eval_cdf(m.f1, y1))
    return max(lo, 0.0), hi


def mtr_dte_lower(m: MarginalPair, delta: float) -> float:
    """Sharp lower bound on P(Y1 - Y0 <= d) when Y1 >= Y0 almost surely.

    Supremum over monotone chains with consecutive gaps in [0, d] of the sum
    of max(F1(a_{k+1}) - F0(a_k), 0); 0 for d < 0.  Computed by the chain
    dynamic program on the padded grid, which is exact for grid-valued chains.
    """
    if delta < 0:
        return 0.0
    return min(chain_sup(m.grid.points, m.f1.values, m.f0.values, float(delta),
                         pad_low=(0.0, 0.0), pad_high=(1.0, 1.0)), 1.0)


@dataclass(frozen=True)
class DualityReport:
    """Result of recomputing the difference-CDF bounds through the copula route."""

    delta_grid: ValueGrid
    discrepancy_lower: np.ndarray
    discrepancy_upper: np.ndarray
    max_discrepancy: float
    passed: bool


def williamson_downs_check(m: MarginalPair, delta_grid: ValueGrid,
                           tol: float = 1e-9) -> DualityReport:
    """Cross-check the difference-CDF bounds via the lower copula and its dual.

    With X = Y1 and Y = -Y0 (so X + Y = Y1 - Y0), the bounds on the sum's CDF
    are sup_{x+y=d} C(F_X(x), F_Y(y)) and inf_{x+y=d} C^d(F_X(x), F_Y(y)),
    where C(u, v) = max(u+v-1, 0) and C^d(u, v) = u + v - C(u, v).  Under
    continuous marginals F_Y(y) = 1 - F0(-y); the supremum/infimum are scanned
    on the same shifted breakpoints the direct route uses, and the two routes
    must agree to numerical precision.
    """
    direct = makarov_dte(m, delta_grid)
    pts, g1v, g0v = _padded_distribution(m)
    lo = np.empty(len(delta_grid))
    hi = np.empty(len(delta_grid))
    for k, d in enumerate(delta_grid.points):
        i1, i0 = shift_indices(pts, float(d))
        u = g1v[i1]
        v = 1.0 - g0v[i0]
        c_low = np.maximum(u + v - 1.0, 0.0)
        c_dual = u + v - c_low
        lo[k] = max(c_low.max(), 0.0)
        hi[k] = min(c_dual.min(), 1.0)
    d_lo = np.abs(lo - direct.raw_lower)
    d_hi = np.abs(np.minimum(direct.raw_upper, 1.0) - hi)
    worst = float(max(d_lo.max(), d_hi.max()))
    return DualityReport(delta_grid, d_lo, d_hi, worst, bool(worst < tol))
