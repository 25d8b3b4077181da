"""Brute-force validation of the engine, independent of the production path.

Containment checks compare computed bounds against ground truth; the chain
dynamic program is checked against exhaustive enumeration on small grids; the
two-marginal joint bounds are checked against explicitly constructed extreme
couplings.  These run in the test suite, not on the runtime path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .copulas import MarginalPair, DteBound, chain_sup, frechet_hoeffding
from .bounds import MarginalBound, JointBound
from .dgp import DgpTruth

DEFAULT_CONTAINMENT_TOL = 0.015  # 0.01 grid effect + 0.005 quadrature/MC allowance
_IDX_SLACK = 1e-9


@dataclass(frozen=True)
class OracleVerdict:
    check: str
    passed: bool
    worst_margin: float
    coordinates: tuple

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "coordinates": list(self.coordinates),
        }


def check_containment(bound, truth: DgpTruth,
                      tol: float = DEFAULT_CONTAINMENT_TOL) -> OracleVerdict:
    """Is the truth inside the bounds everywhere?

    worst_margin is the signed distance to the nearest bound (negative means
    violated); passed iff worst_margin >= -tol.
    """
    if isinstance(bound, MarginalBound):
        truth_cdf = truth.f0 if bound.target == "F0" else truth.f1
        if not np.array_equal(bound.grid.points, truth_cdf.grid.points):
            raise ValueError("bound and truth grids differ")
        t = truth_cdf.values
        lo, hi = bound.lower, bound.upper
        coords = bound.grid.points
        name = f"containment:{bound.target}:{bound.regime.value}"
    elif isinstance(bound, JointBound):
        if bound.pairs != truth.pairs:
            raise ValueError("bound and truth query pairs differ")
        t = truth.joint
        lo, hi = bound.lower, bound.upper
        coords = np.arange(len(t))
        name = f"containment:joint:{bound.regime.value}"
    elif isinstance(bound, DteBound):
        if not np.array_equal(bound.delta_grid.points, truth.dte.grid.points):
            raise ValueError("bound and truth delta grids differ")
        t = truth.dte.values
        lo, hi = bound.lower, bound.upper
        coords = bound.delta_grid.points
        name = "containment:dte"
    else:
        raise TypeError(f"cannot check {type(bound).__name__}")
    margins = np.minimum(t - lo, hi - t)
    k = int(np.argmin(margins))
    worst = float(margins[k])
    if isinstance(bound, JointBound):
        where = bound.pairs[k]
    else:
        where = (float(coords[k]),)
    return OracleVerdict(name, bool(worst >= -tol), worst, tuple(where))


def _enumerate_chains(points: np.ndarray, g1: np.ndarray, g0: np.ndarray,
                      delta: float) -> float:
    """Exhaustive chain supremum on exactly the dynamic program's point set.

    Depth-first search over strictly increasing sequences with per-link gaps
    at most delta.  Every point contributes its zero-gap self-link term
    unconditionally: the term is nonnegative, the extended chain stays
    admissible, so the supremum is unchanged and matches the DP's semantics.
    """
    if delta < 0:
        return 0.0
    from .copulas import chain_support

    yp, a1, a0 = chain_support(points, g1, g0, float(delta),
                               pad_low=(0.0, 0.0), pad_high=(1.0, 1.0))
    n = len(yp)
    best = 0.0

    def extend(i: int, val: float) -> None:
        nonlocal best
        if val > best:
            best = val
        for j in range(i + 1, n):
            if yp[j] - yp[i] > delta + _IDX_SLACK:
                break
            extend(j, val + max(a1[j] - a0[i], 0.0) + max(a1[j] - a0[j], 0.0))

    for i in range(n):
        extend(i, max(a1[i] - a0[i], 0.0))
    return best


def exhaustive_chain_check(m: MarginalPair, delta: float) -> OracleVerdict:
    """Chain dynamic program against exhaustive enumeration, exact to 1e-12."""
    n = len(m.grid)
    if n > 25:
        raise ValueError("enumeration oracle is limited to grids of <= 25 points")
    dp = chain_sup(m.grid.points, m.f1.values, m.f0.values, float(delta),
                   pad_low=(0.0, 0.0), pad_high=(1.0, 1.0))
    enum = _enumerate_chains(m.grid.points, m.f1.values, m.f0.values, float(delta))
    gap = abs(dp - enum)
    return OracleVerdict("chain_dp_vs_enumeration", bool(gap <= 1e-12), -gap,
                         (float(delta), dp, enum))


def _extreme_coupling_cdf(pts: np.ndarray, mass0: np.ndarray, mass1: np.ndarray,
                          y0: float, y1: float, antitone: bool) -> float:
    """Joint CDF at (y0, y1) of an explicitly built extreme coupling.

    Greedy mass matching of the two atom vectors: in the comonotone coupling
    both supports are traversed in increasing order; in the antitone one the
    second support is traversed in decreasing order.
    """
    n = len(pts)
    idx1 = list(range(n - 1, -1, -1)) if antitone else list(range(n))
    i = j = 0
    a = mass0[0]
    b = mass1[idx1[0]]
    total = 0.0
    while i < n and j < n:
        m = min(a, b)
        if m > 0 and pts[i] <= y0 + _IDX_SLACK and pts[idx1[j]] <= y1 + _IDX_SLACK:
            total += m
        a -= m
        b -= m
        if a <= 1e-15:
            i += 1
            a = mass0[i] if i < n else 0.0
        if b <= 1e-15:
            j += 1
            b = mass1[idx1[j]] if j < n else 0.0
    return total


def discrete_copula_sharpness_probe(m: MarginalPair, y0: float, y1: float) -> OracleVerdict:
    """Do explicit extreme couplings attain the two-marginal joint bounds?

    Builds the comonotone and antitone couplings of the step marginals and
    compares their joint CDF at (y0, y1) with the upper and lower bound; both
    must match to 1e-9.
    """
    n = len(m.grid)
    if n > 50:
        raise ValueError("sharpness probe is limited to grids of <= 50 points")
    if abs(m.f0.values[-1] - 1.0) > 1e-9 or abs(m.f1.values[-1] - 1.0) > 1e-9:
        raise ValueError("probe needs marginals reaching 1 on the grid")
    mass0 = np.diff(np.concatenate(([0.0], m.f0.values)))
    mass1 = np.diff(np.concatenate(([0.0], m.f1.values)))
    lo, hi = frechet_hoeffding(m, y0, y1)
    como = _extreme_coupling_cdf(m.grid.points, mass0, mass1, y0, y1, antitone=False)
    anti = _extreme_coupling_cdf(m.grid.points, mass0, mass1, y0, y1, antitone=True)
    gap = max(abs(como - hi), abs(anti - lo))
    return OracleVerdict("frechet_hoeffding_attainability", bool(gap <= 1e-9), -gap,
                         (float(y0), float(y1), anti, como))
