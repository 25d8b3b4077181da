"""Numerical checks of the testable restrictions.

These are point-null checks on discretized laws and computed bounds, not
statistical tests: the default tolerance absorbs grid discretization only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ObservedLaw
from .bounds import MarginalBound
from .copulas import DteBound

DEFAULT_TOL = 0.01


@dataclass(frozen=True)
class DiagnosticReport:
    test: str                      # NSM_INEQ | MTR_DOMINANCE | DTE_CROSSING
    tol: float
    violations: tuple              # ((coordinates...), magnitude) entries
    max_violation: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "tol": self.tol,
            "passed": self.passed,
            "max_violation": self.max_violation,
            "violations": [
                {"coordinates": list(c), "magnitude": m} for c, m in self.violations
            ],
        }


def test_nsm(law: ObservedLaw, tol: float = DEFAULT_TOL) -> DiagnosticReport:
    """Monotone functional inequalities implied by stochastic monotonicity.

    For every ordered instrument pair with p(z') >= p(z), both arm CDFs must
    satisfy P(y|d,z) <= P(y|d,z') at every grid point.  One violation entry
    per (arm, pair), carrying the worst grid point.
    """
    violations = []
    worst = 0.0
    order = np.argsort(law.propensity, kind="stable")
    for a in range(law.n_z):
        for b in range(a + 1, law.n_z):
            i, j = order[a], order[b]          # p(z_j) >= p(z_i)
            for d, mat in ((0, law.cond0), (1, law.cond1)):
                gap = mat[i] - mat[j]
                k = int(np.argmax(gap))
                mag = float(gap[k])
                worst = max(worst, mag)
                if mag > tol:
                    violations.append(((d, law.z_labels[i], law.z_labels[j], k), mag))
    return DiagnosticReport("NSM_INEQ", tol, tuple(violations), max(worst, 0.0))


def test_mtr_dominance(bound0: MarginalBound, bound1: MarginalBound,
                       tol: float = DEFAULT_TOL) -> DiagnosticReport:
    """Necessary stochastic dominance F1(y) <= F0(y) under monotone response.

    With partially identified marginals the refutable direction is
    F1^L(y) > F0^U(y): no pair of CDFs inside the bounds can then be ordered.
    """
    if not np.array_equal(bound0.grid.points, bound1.grid.points):
        raise ValueError("bounds must share one value grid")
    gap = bound1.lower - bound0.upper
    worst = float(gap.max())
    violations = tuple(
        ((int(k),), float(gap[k])) for k in np.where(gap > tol)[0]
    )
    return DiagnosticReport("MTR_DOMINANCE", tol, violations, max(worst, 0.0))


def test_dte_crossing(dte: DteBound, tol: float = DEFAULT_TOL) -> DiagnosticReport:
    """Refutation signal in the treatment-effect bounds.

    Uses the pre-clamp values on purpose: when monotone treatment response
    fails in the data, the raw lower bound can cross the raw upper bound and
    can even exceed one; clamping would mask exactly that signal.
    """
    cross = dte.raw_lower - dte.raw_upper
    above = dte.raw_lower - 1.0
    violations = []
    worst = 0.0
    for k in range(len(dte.delta_grid)):
        if cross[k] > worst:
            worst = float(cross[k])
        if above[k] > worst:
            worst = float(above[k])
        if cross[k] > tol:
            violations.append((("crossing", int(k)), float(cross[k])))
        if above[k] > tol:
            violations.append((("above_one", int(k)), float(above[k])))
    return DiagnosticReport("DTE_CROSSING", tol, tuple(violations), max(worst, 0.0))


# these are library operations, not pytest cases, despite the names
test_nsm.__test__ = False
test_mtr_dominance.__test__ = False
test_dte_crossing.__test__ = False
