import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from conftest import random_step_pair, shifted_uniform_pair, uniform_pair
from trisys.copulas import (
    DteBound,
    InfeasibleThetaError,
    MarginalPair,
    frechet_hoeffding,
    makarov_dte,
    mtr_dte_lower,
    mtr_joint_bounds,
    nelsen_constrained,
    williamson_downs_check,
)
from trisys.grids import StepCdf, ValueGrid
from trisys.oracle import discrete_copula_sharpness_probe, exhaustive_chain_check


# -- two-marginal joint bounds ---------------------------------------------


def test_frechet_hoeffding_examples():
    m = uniform_pair()
    lo, hi = frechet_hoeffding(m, 0.3, 0.8)
    assert (lo, hi) == pytest.approx((0.1, 0.3), abs=1e-12)
    # degenerate: F0(y0) = 1 pins the interval at F1(y1)
    lo, hi = frechet_hoeffding(m, 1.0, 0.4)
    assert lo == pytest.approx(0.4, abs=1e-12)
    assert hi == pytest.approx(0.4, abs=1e-12)
    lo, hi = frechet_hoeffding(m, 0.5, 0.5)
    assert (lo, hi) == pytest.approx((0.0, 0.5), abs=1e-12)


def test_frechet_hoeffding_attained_by_extreme_couplings():
    # the probe builds the couplings explicitly and checks both endpoints
    m = uniform_pair()
    verdict = discrete_copula_sharpness_probe(m, 0.3, 0.8)
    assert verdict.passed, verdict


def test_nelsen_examples():
    m = uniform_pair()
    # at the pinned point itself the interval collapses to theta
    lo, hi = nelsen_constrained(m, 0.5, 0.5, 0.3, 0.5, 0.5)
    assert (lo, hi) == pytest.approx((0.3, 0.3), abs=1e-12)
    # a vacuous pin at the top corner reduces to the unconstrained bounds
    lo, hi = nelsen_constrained(m, 1.0, 1.0, 1.0, 0.3, 0.8)
    assert (lo, hi) == pytest.approx(frechet_hoeffding(m, 0.3, 0.8), abs=1e-12)
    # a perfectly-positive-dependence pin forces the joint CDF at (0.3, 0.8)
    lo, hi = nelsen_constrained(m, 0.5, 0.5, 0.5, 0.3, 0.8)
    assert (lo, hi) == pytest.approx((0.3, 0.3), abs=1e-12)


def test_nelsen_infeasible_theta_names_the_side():
    m = uniform_pair()
    with pytest.raises(InfeasibleThetaError, match="below"):
        nelsen_constrained(m, 0.5, 0.5, -0.05, 0.3, 0.8)
    with pytest.raises(InfeasibleThetaError, match="above"):
        nelsen_constrained(m, 0.5, 0.5, 0.6, 0.3, 0.8)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0, 1),
       st.floats(0, 1), st.floats(0, 1))
def test_nelsen_nests_inside_unconstrained(a0, a1, t, y0, y1):
    m = uniform_pair()
    lo0, hi0 = frechet_hoeffding(m, a0, a1)
    theta = lo0 + t * (hi0 - lo0)
    lo, hi = nelsen_constrained(m, a0, a1, theta, y0, y1)
    base_lo, base_hi = frechet_hoeffding(m, y0, y1)
    assert base_lo - 1e-12 <= lo
    assert lo <= hi + 1e-12
    assert hi <= base_hi + 1e-12


# -- difference-CDF bounds ---------------------------------------------------


def test_makarov_identical_marginals_at_zero():
    m = uniform_pair()
    b = makarov_dte(m, ValueGrid(np.array([0.0, 1.0])))
    assert b.lower[0] == pytest.approx(0.0, abs=1e-12)
    assert b.upper[0] == pytest.approx(1.0, abs=1e-12)


def test_makarov_dominated_shift_gives_zero_lower():
    # F1(y) <= F0(y - d) for every y makes every lower term vanish
    grid = ValueGrid.regular(0.0, 3.0, 0.05)
    f0 = np.clip(grid.points, 0, 1)
    f1 = np.clip(grid.points - 2.0, 0, 1)
    m = MarginalPair(StepCdf(grid, f0), StepCdf(grid, f1))
    b = makarov_dte(m, ValueGrid(np.array([0.5, 1.0])))
    assert np.all(b.lower == 0.0)


def test_makarov_normal_shift_median():
    # N(0,1) and N(1,1) at d = 1: the shifted difference vanishes identically
    # in the continuum; on the grid the misaligned shift can pick up at most
    # one step of density (phi(0) * step ~ 3.4e-3), which bounds the residual.
    grid = ValueGrid.regular(-8.0, 9.0, 17.0 / 2000.0)
    step_effect = 0.399 * grid.step
    m = MarginalPair(StepCdf(grid, ndtr(grid.points)), StepCdf(grid, ndtr(grid.points - 1.0)))
    b = makarov_dte(m, ValueGrid(np.array([1.0, 2.0])))
    assert b.lower[0] == pytest.approx(0.0, abs=step_effect)
    assert b.upper[0] == pytest.approx(1.0, abs=step_effect)
    # brute force: both extreme couplings' difference CDFs stay inside
    rng = np.random.default_rng(7)
    y0 = rng.standard_normal(1_000_000)
    como = (y0 + 1.0) - y0          # comonotone coupling: Y1 = Y0 + 1
    anti = (1.0 - y0) - y0          # antitone coupling: Y1 = 1 - Y0
    for d in (1.0, 2.0):
        k = 0 if d == 1.0 else 1
        for sample in (como, anti):
            fd = float(np.mean(sample <= d))
            assert b.lower[k] - 1e-3 <= fd <= b.upper[k] + 1e-3


def test_makarov_bounds_are_ordered_and_monotone():
    rng = np.random.default_rng(11)
    for _ in range(10):
        m = random_step_pair(rng, 15)
        dgrid = ValueGrid.regular(-2.0, 2.0, 0.25)
        b = makarov_dte(m, dgrid)
        assert np.all(b.lower <= b.upper + 1e-12)
        assert np.all(np.diff(b.lower) >= -1e-12)
        assert np.all(np.diff(b.upper) >= -1e-12)


# -- bounds under monotone treatment response --------------------------------


def test_mtr_joint_diagonal_pins_to_f1():
    m = shifted_uniform_pair()
    for y in (0.2, 1.0, 1.5):
        lo, hi = mtr_joint_bounds(m, y, y)
        expect = float(m.f1(y))
        assert lo == pytest.approx(expect, abs=1e-12)
        assert hi == pytest.approx(expect, abs=1e-12)
    lo, hi = mtr_joint_bounds(m, 1.7, 0.9)  # y0 > y1
    assert lo == hi == pytest.approx(float(m.f1(0.9)), abs=1e-12)


def test_mtr_joint_shifted_uniform_oracle():
    # F0 = U(0,1), F1 = U(1,2), query (0.5, 1.5).  Every coupling of these
    # marginals satisfies Y1 >= Y0, so the unconstrained extremes are
    # feasible: the antitone coupling Y1 = 2 - Y0 gives
    # P(Y0<=.5, Y1<=1.5) = P(Y0<=.5, Y0>=.5) = 0, attaining the lower end;
    # the comonotone coupling gives 0.5, attaining the upper end.
    m = shifted_uniform_pair()
    lo, hi = mtr_joint_bounds(m, 0.5, 1.5)
    assert lo == pytest.approx(0.0, abs=1e-9)
    assert hi == pytest.approx(0.5, abs=1e-9)
    # validity against explicit feasible couplings (all couplings are
    # monotone-response feasible here): random rearrangements of atoms
    rng = np.random.default_rng(5)
    n = 400
    atoms0 = (np.arange(n) + 0.5) / n
    for _ in range(20):
        perm = rng.permutation(n)
        atoms1 = 1.0 + (perm + 0.5) / n
        value = float(np.mean((atoms0 <= 0.5) & (atoms1 <= 1.5)))
        assert lo - 1e-9 <= value <= hi + 2.0 / n


def test_mtr_joint_nests_inside_unconstrained():
    rng = np.random.default_rng(23)
    for _ in range(20):
        m = random_step_pair(rng, 21)
        # impose dominance so the restriction is coherent
        f1 = np.minimum(m.f0.values, m.f1.values)
        m = MarginalPair(m.f0, StepCdf(m.grid, f1))
        y0, y1 = sorted(rng.uniform(-2, 2, 2))
        lo, hi = mtr_joint_bounds(m, y0, y1)
        base_lo, base_hi = frechet_hoeffding(m, y0, y1)
        assert base_lo - 1e-12 <= lo
        assert hi <= base_hi + 1e-12
        assert lo <= hi + 1e-12


def test_mtr_dte_lower_examples():
    m = shifted_uniform_pair()
    assert mtr_dte_lower(m, -0.5) == 0.0
    # identical marginals: at d = 0 only zero-gap chains exist, so the bound
    # is 0; for any d > 0 a chain marching in steps of d telescopes the full
    # mass, matching the sharp value (monotone response plus equal marginals
    # force Y1 = Y0, hence P(Y1 - Y0 <= d) = 1).
    ident = uniform_pair()
    assert mtr_dte_lower(ident, 0.0) == pytest.approx(0.0, abs=1e-12)
    for d in (0.3, 1.0):
        assert mtr_dte_lower(ident, d) == pytest.approx(1.0, abs=1e-9)
    assert exhaustive_chain_check(uniform_pair(n=11), 0.2).passed
    # F0 = U(0,1), F1 = U(1,2): each link has F1(a + d) - F0(a) = d - 1 + eps
    # at most, so the bound is 0 at d = 1 -- and indeed the feasible coupling
    # Y1 = 2 - Y0 keeps P(D <= 1) = 0.5 away from 1, while Y1 = Y0 + 1 gives 1.
    assert mtr_dte_lower(m, 1.0) == pytest.approx(0.0, abs=1e-9)
    # at d = 2 the chain (0, 2) collects all mass: the effect cannot exceed 2
    assert mtr_dte_lower(m, 2.0) == pytest.approx(1.0, abs=1e-9)


def test_mtr_dte_lower_at_zero_matches_pointwise_sup():
    rng = np.random.default_rng(2)
    for _ in range(10):
        m = random_step_pair(rng, 15)
        expect = max(float((m.f1.values - m.f0.values).max()), 0.0)
        assert mtr_dte_lower(m, 0.0) == pytest.approx(expect, abs=1e-12)


def test_mtr_dte_lower_dominates_makarov_and_is_monotone():
    rng = np.random.default_rng(17)
    dgrid = ValueGrid.regular(0.0, 4.0, 0.5)
    for _ in range(10):
        m = random_step_pair(rng, 15)
        mak = makarov_dte(m, dgrid)
        vals = np.array([mtr_dte_lower(m, d) for d in dgrid.points])
        assert np.all(vals >= mak.raw_lower - 1e-12)
        assert np.all(np.diff(vals) >= -1e-12)


def test_mtr_dte_lower_window_vacuous_equals_unconstrained():
    rng = np.random.default_rng(29)
    m = random_step_pair(rng, 7)
    span = float(m.grid.points[-1] - m.grid.points[0])
    big = mtr_dte_lower(m, span + 5.0)
    bigger = mtr_dte_lower(m, span + 50.0)
    assert big == pytest.approx(bigger, abs=1e-12)
    assert exhaustive_chain_check(m, span + 5.0).passed


# -- duality check -----------------------------------------------------------


def test_williamson_downs_on_smooth_marginals(paper_truth):
    m = MarginalPair(paper_truth.f0, paper_truth.f1)
    report = williamson_downs_check(m, ValueGrid.regular(-1.0, 10.0, 0.25))
    assert report.passed
    assert report.max_discrepancy < 1e-9


def test_williamson_downs_point_mass_and_identical():
    grid = ValueGrid.regular(-1.0, 1.0, 0.1)
    point = np.where(grid.points >= 0.0, 1.0, 0.0)
    f1 = np.clip(grid.points + 0.5, 0, 1)
    m = MarginalPair(StepCdf(grid, point), StepCdf(grid, f1))
    report = williamson_downs_check(m, ValueGrid.regular(-1.0, 1.0, 0.2))
    assert report.max_discrepancy < 1e-12
    ident = uniform_pair()
    b = makarov_dte(ident, ValueGrid(np.array([0.0, 0.5])))
    assert (b.lower[0], b.upper[0]) == (0.0, 1.0)
    assert williamson_downs_check(ident, ValueGrid(np.array([0.0, 0.5]))).passed


def test_dte_bound_container_rejects_nothing_valid():
    dgrid = ValueGrid(np.array([0.0, 1.0, 2.0]))
    b = DteBound.from_raw(dgrid, [0.2, 0.1, 0.5], [0.9, 1.2, 0.8])
    assert np.all(np.diff(b.lower) >= 0)
    assert np.all(np.diff(b.upper) >= 0)
    assert np.all((b.upper >= 0) & (b.upper <= 1))
    assert b.raw_upper[1] == 1.2  # raw values survive for diagnostics
