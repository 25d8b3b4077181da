import numpy as np
import pytest

from trisys.dgp import DgpSpec, build_observed_law, build_truth, monte_carlo_law
from trisys.grids import ObservedLaw, StepCdf, ValueGrid
from trisys.tables import TABLE1_Y0, TABLE1_Y1, TableConfig, TableEngine

JOINT_PANEL = tuple((a, b) for a in TABLE1_Y0 for b in TABLE1_Y1)


@pytest.fixture(scope="session")
def table_engine():
    engine = TableEngine(TableConfig())
    engine.prefetch()
    return engine


@pytest.fixture(scope="session")
def paper_law(table_engine):
    """Reference configuration law (rho=-0.75, zbar=1, endpoint z grid)."""
    return table_engine.law(-0.75, 1.0)


@pytest.fixture(scope="session")
def paper_spec():
    return TableConfig().spec(-0.75, 1.0)


@pytest.fixture(scope="session")
def paper_truth(paper_spec):
    return build_truth(paper_spec, pairs=JOINT_PANEL)


@pytest.fixture(scope="session")
def spec41():
    return DgpSpec(rho=-0.75, z_half_width=1.0,
                   delta_grid=ValueGrid.regular(-1.0, 14.0, 0.25))


@pytest.fixture(scope="session")
def law41(spec41):
    """Same design on the default 41-point instrument grid."""
    return build_observed_law(spec41)


@pytest.fixture(scope="session")
def truth41(spec41):
    return build_truth(spec41, pairs=JOINT_PANEL)


@pytest.fixture(scope="session")
def mc_million(spec41):
    """One-million-draw simulation oracle, fixed seed."""
    return monte_carlo_law(spec41, draws=1_000_000, seed=20240501, pairs=JOINT_PANEL)


@pytest.fixture(scope="session")
def tables_dir(tmp_path_factory):
    """One full CLI table run, shared by the CLI and acceptance tests."""
    from trisys.cli import main

    out = tmp_path_factory.mktemp("tables-run-a")
    assert main(["tables", "--out", str(out)]) == 0
    return out


def point_identified_law(ny: int = 121) -> ObservedLaw:
    """Synthetic law whose propensity spans {0, 1} exactly.

    All conditional CDFs are standard normal, i.e. no selection on
    unobservables; the bounds must then pinch to a point.
    """
    from scipy.special import ndtr

    grid = ValueGrid.regular(-3.0, 3.0, 6.0 / (ny - 1))
    cdf = ndtr(grid.points)
    cond = np.tile(cdf, (3, 1))
    return ObservedLaw(grid, ("0", "1", "2"), np.array([0.0, 0.5, 1.0]), cond, cond)


def uniform_pair(n: int = 41):
    """Uniform(0,1) marginals twice, on an n-point grid of [0, 1]."""
    grid = ValueGrid.regular(0.0, 1.0, 1.0 / (n - 1))
    vals = grid.points.copy()
    from trisys.copulas import MarginalPair

    return MarginalPair(StepCdf(grid, vals), StepCdf(grid, vals))


def shifted_uniform_pair(n: int = 201):
    """F0 = Uniform(0,1), F1 = Uniform(1,2) on a shared grid of [0, 2]."""
    grid = ValueGrid.regular(0.0, 2.0, 2.0 / (n - 1))
    f0 = np.clip(grid.points, 0.0, 1.0)
    f1 = np.clip(grid.points - 1.0, 0.0, 1.0)
    from trisys.copulas import MarginalPair

    return MarginalPair(StepCdf(grid, f0), StepCdf(grid, f1))


def random_step_pair(rng, n: int, reach_one: bool = True):
    """Random valid marginal pair on a shared random grid."""
    from trisys.copulas import MarginalPair

    pts = np.sort(rng.uniform(-2.0, 2.0, n))
    pts += 1e-6 * np.arange(n)  # enforce strict increase
    f0 = np.sort(rng.uniform(0.0, 1.0, n))
    f1 = np.sort(rng.uniform(0.0, 1.0, n))
    if reach_one:
        f0[-1] = 1.0
        f1[-1] = 1.0
    grid = ValueGrid(pts)
    return MarginalPair(StepCdf(grid, f0), StepCdf(grid, f1))
