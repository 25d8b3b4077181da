import math

import numpy as np
import pytest
from scipy.special import ndtr

from trisys.copulas import frechet_hoeffding, MarginalPair
from trisys.diagnostics import test_nsm
from trisys.dgp import (
    DgpSpec,
    QuadratureError,
    build_observed_law,
    build_truth,
    monte_carlo_law,
)
from trisys.grids import ValueGrid, validate_observed_law


def test_spec_validation():
    with pytest.raises(ValueError):
        DgpSpec(rho=0.2, z_half_width=1.0)
    with pytest.raises(ValueError):
        DgpSpec(rho=-0.5, z_half_width=-1.0)
    with pytest.raises(ValueError):
        DgpSpec(rho=-0.5, z_half_width=1.0, dof=0)


def test_spec_json_round_trip(tmp_path):
    spec = DgpSpec(rho=-0.5, z_half_width=1.5, z_grid_size=5)
    p = tmp_path / "spec.json"
    import json

    p.write_text(json.dumps(spec.to_dict()))
    back = DgpSpec.from_json(p)
    assert back.rho == spec.rho
    assert back.z_grid_size == 5
    assert np.array_equal(back.y_grid.points, spec.y_grid.points)


def test_propensity_is_normal_cdf():
    spec = DgpSpec(rho=-0.75, z_half_width=1.0, z_grid_size=5)
    law = build_observed_law(spec)
    assert law.propensity[2] == pytest.approx(0.5, abs=1e-12)  # p(0) = 1/2
    assert np.allclose(law.propensity, ndtr(spec.z_values), atol=1e-12)


def test_rho_zero_removes_selection():
    spec = DgpSpec(rho=0.0, z_half_width=1.0, z_grid_size=5)
    law = build_observed_law(spec)
    phi = ndtr(spec.y_grid.points)
    for i in range(law.n_z):
        assert np.allclose(law.cond0[i], phi, atol=1e-9)


def test_generated_law_is_valid(law41):
    assert validate_observed_law(law41) == []


def test_truth_dte_is_chi_squared_with_series_cross_check(spec41):
    truth = build_truth(spec41)
    d = spec41.delta_grid.points
    # independent closed form for even degrees of freedom:
    # 1 - exp(-x/2) * sum_{j<k/2} (x/2)^j / j!
    x = np.maximum(d, 0.0) / 2.0
    series = 1.0 - np.exp(-x) * sum(x ** j / math.factorial(j) for j in range(spec41.dof // 2))
    series[d < 0] = 0.0
    assert np.abs(truth.dte.values - series).max() < 1e-10
    assert truth.dte(3.0) == pytest.approx(1.0 - math.exp(-1.5), abs=1e-12)


def test_truth_marginals(spec41):
    truth = build_truth(spec41, pairs=[(1.0, 3.0)])
    assert truth.f0(0.0) == pytest.approx(0.5, abs=1e-12)
    sig = math.sqrt(1 + spec41.rho ** 2)
    assert truth.f0(1.0) == pytest.approx(ndtr(1.0 / sig), abs=1e-12)
    assert truth.joint[0] == pytest.approx(0.63, abs=0.01)
    # the design satisfies both monotonicity restrictions
    assert np.all(truth.f1.values <= truth.f0.values + 1e-12)


def test_truth_joint_within_frechet_hoeffding(truth41):
    m = MarginalPair(truth41.f0, truth41.f1)
    for (y0, y1), val in zip(truth41.pairs, truth41.joint):
        lo, hi = frechet_hoeffding(m, y0, y1)
        assert lo - 1e-9 <= val <= hi + 1e-9


def test_law_satisfies_monotone_inequalities(law41):
    assert test_nsm(law41).passed


def test_quadrature_convergence_guard():
    with pytest.raises(QuadratureError):
        build_observed_law(DgpSpec(rho=-0.75, z_half_width=1.0, z_grid_size=3,
                                   quadrature_nodes=2))


def test_monte_carlo_matches_analytic(spec41, law41, truth41, mc_million):
    mc_law, mc_truth = mc_million
    n = 1_000_000
    # binomial error bound on the propensities
    assert np.abs(mc_law.propensity - law41.propensity).max() < 4.0 / math.sqrt(n)
    # empirical-process envelope on the marginal CDFs
    dkw = 3.0 * math.sqrt(math.log(2 / 0.05) / (2 * n))
    assert np.abs(mc_truth.f0.values - truth41.f0.values).max() < dkw
    assert np.abs(mc_truth.f1.values - truth41.f1.values).max() < dkw
    assert np.abs(mc_truth.dte.values - truth41.dte.values).max() < dkw
    assert np.abs(mc_truth.joint - truth41.joint).max() < dkw
    # conditional CDFs: cell counts are smaller, allow that in the envelope
    p_min = min(law41.p_low, 1 - law41.p_bar)
    dkw_cond = 3.0 * math.sqrt(math.log(2 / 0.05) / (2 * n * p_min))
    assert np.abs(mc_law.cond1 - law41.cond1).max() < dkw_cond
    assert np.abs(mc_law.cond0 - law41.cond0).max() < dkw_cond


def test_monte_carlo_deterministic(spec41):
    a_law, a_truth = monte_carlo_law(spec41, draws=120_000, seed=42)
    b_law, b_truth = monte_carlo_law(spec41, draws=120_000, seed=42)
    assert np.array_equal(a_law.cond0, b_law.cond0)
    assert np.array_equal(a_law.cond1, b_law.cond1)
    assert np.array_equal(a_law.propensity, b_law.propensity)
    assert np.array_equal(a_truth.f1.values, b_truth.f1.values)
    c_law, _ = monte_carlo_law(spec41, draws=120_000, seed=43)
    assert not np.array_equal(a_law.cond1, c_law.cond1)


def test_monte_carlo_draw_floor(spec41):
    with pytest.raises(ValueError):
        monte_carlo_law(spec41, draws=999, seed=1)


def test_violating_law_builders_are_valid():
    spec = DgpSpec(rho=-0.75, z_half_width=1.0, z_grid_size=3)
    from trisys.dgp import mtr_violating_law, nsm_violating_law

    for law in (nsm_violating_law(spec), mtr_violating_law(spec)):
        assert validate_observed_law(law) == []


@pytest.mark.parametrize("rho,zbar", [(-0.25, 2.0), (-0.5, 0.5), (-0.75, 1.5)])
def test_monte_carlo_agreement_across_designs(rho, zbar):
    spec = DgpSpec(rho=rho, z_half_width=zbar, z_grid_size=9,
                   delta_grid=ValueGrid.regular(-1.0, 10.0, 0.5))
    law = build_observed_law(spec)
    mc_law, mc_truth = monte_carlo_law(spec, draws=200_000, seed=7)
    truth = build_truth(spec)
    n = 200_000
    assert np.abs(mc_law.propensity - law.propensity).max() < 4.0 / math.sqrt(n)
    dkw = 3.0 * math.sqrt(math.log(2 / 0.05) / (2 * n))
    assert np.abs(mc_truth.f1.values - truth.f1.values).max() < dkw
    assert np.abs(mc_truth.dte.values - truth.dte.values).max() < dkw
