"""Analytic and simulated realizations of the numerical-example design.

The design: Y0 = rho*U + eps, Y1 = Y0 + eta, D(Z) = 1(Z >= U), with
(U, eps) iid standard normal, eta ~ chi-squared(k) independent of both, and
the instrument uniform on (-zbar, zbar).  The propensity at z is Phi(z), the
D=0 arm CDF is P(rho*U + eps <= y | U > z) and the D=1 arm CDF is
P(rho*U + eps + eta <= y | U <= z); both are computed by Gauss-Legendre
quadrature over u with the normal/chi-squared convolution CDF tabulated once
on a fine grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import ndtr, roots_legendre

from .grids import ObservedLaw, StepCdf, ValueGrid

U_TAIL = 9.0          # standard-normal integration is truncated at +-U_TAIL
CONV_TOL = 1e-6       # max CDF change allowed when doubling the quadrature
H_TABLE_STEP = 0.002  # tabulation step for the convolution CDF


class QuadratureError(RuntimeError):
    pass


def default_y_grid() -> ValueGrid:
    return ValueGrid.regular(-6.0, 16.0, 0.05)


def default_delta_grid() -> ValueGrid:
    return ValueGrid.regular(-1.0, 16.0, 0.05)


@dataclass(frozen=True)
class DgpSpec:
    rho: float
    z_half_width: float
    dof: int = 2
    y_grid: ValueGrid = None
    delta_grid: ValueGrid = None
    z_grid_size: int = 41
    quadrature_nodes: int = 256

    def __post_init__(self):
        if not -1.0 <= self.rho <= 0.0:
            raise ValueError(f"rho must be in [-1, 0], got {self.rho}")
        if self.z_half_width <= 0:
            raise ValueError("z_half_width must be positive")
        if self.dof < 1:
            raise ValueError("dof must be a positive integer")
        if self.z_grid_size < 1:
            raise ValueError("z_grid_size must be positive")
        if self.quadrature_nodes < 2:
            raise ValueError("quadrature_nodes must be at least 2")
        if self.y_grid is None:
            object.__setattr__(self, "y_grid", default_y_grid())
        if self.delta_grid is None:
            object.__setattr__(self, "delta_grid", default_delta_grid())

    @property
    def z_values(self) -> np.ndarray:
        if self.z_grid_size == 1:
            return np.array([-self.z_half_width])
        return np.linspace(-self.z_half_width, self.z_half_width, self.z_grid_size)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "z_half_width": self.z_half_width,
            "dof": self.dof,
            "y_grid": self.y_grid.points.tolist(),
            "delta_grid": self.delta_grid.points.tolist(),
            "z_grid_size": self.z_grid_size,
            "quadrature_nodes": self.quadrature_nodes,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DgpSpec":
        return cls(
            rho=float(doc["rho"]),
            z_half_width=float(doc["z_half_width"]),
            dof=int(doc.get("dof", 2)),
            y_grid=ValueGrid(np.asarray(doc["y_grid"], float)) if "y_grid" in doc else None,
            delta_grid=ValueGrid(np.asarray(doc["delta_grid"], float)) if "delta_grid" in doc else None,
            z_grid_size=int(doc.get("z_grid_size", 41)),
            quadrature_nodes=int(doc.get("quadrature_nodes", 256)),
        )

    @classmethod
    def from_json(cls, path) -> "DgpSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class DgpTruth:
    f0: StepCdf
    f1: StepCdf
    pairs: tuple[tuple[float, float], ...]
    joint: np.ndarray
    dte: StepCdf


def _gl(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _shock_nodes(dof: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Probability-transform quadrature nodes for the chi-squared shock."""
    v, w = _gl(0.0, 1.0, n)
    return stats.chi2.ppf(v, df=dof), w


def _conv_table(rho: float, dof: int, y_grid: ValueGrid, nodes: int, eta_sign: float,
                step: float) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate H(t) = P(eps + eta_sign*eta <= t) on a fine t grid."""
    reach = abs(rho) * U_TAIL + 1.0
    t_lo = y_grid.points[0] - reach - (dof * 12.0 if eta_sign < 0 else 0.0)
    t_hi = y_grid.points[-1] + reach + (dof * 12.0 if eta_sign > 0 else 0.0)
    t = np.arange(t_lo, t_hi + step, step)
    s, w = _shock_nodes(dof, nodes)
    h = ndtr(t[None, :] - eta_sign * s[:, None]).T @ w
    return t, h


def _conditional_cdfs(rho: float, zs: np.ndarray, y_grid: ValueGrid, dof: int,
                      nodes: int, eta_sign: float) -> tuple[np.ndarray, np.ndarray]:
    y = y_grid.points
    t_tab, h_tab = _conv_table(rho, dof, y_grid, nodes, eta_sign, H_TABLE_STEP * 256.0 / nodes)
    c0 = np.empty((len(zs), len(y)))
    c1 = np.empty((len(zs), len(y)))
    for i, z in enumerate(zs):
        u, w = _gl(z, max(U_TAIL, z + 1.0), nodes)
        phi = np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
        c0[i] = (ndtr(y[None, :] - rho * u[:, None]) * (phi * w)[:, None]).sum(axis=0) / (1.0 - ndtr(z))
        u, w = _gl(min(-U_TAIL, z - 1.0), z, nodes)
        phi = np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
        hv = np.interp(y[None, :] - rho * u[:, None], t_tab, h_tab)
        c1[i] = (hv * (phi * w)[:, None]).sum(axis=0) / ndtr(z)
    return np.clip(c0, 0.0, 1.0), np.clip(c1, 0.0, 1.0)


def _build_law(rho: float, z_half_width: float, dof: int, y_grid: ValueGrid,
               z_values: np.ndarray, nodes: int, eta_sign: float = 1.0,
               check: bool = True) -> ObservedLaw:
    c0, c1 = _conditional_cdfs(rho, z_values, y_grid, dof, 2 * nodes, eta_sign)
    if check:
        c0_coarse, c1_coarse = _conditional_cdfs(rho, z_values, y_grid, dof, nodes, eta_sign)
        drift = max(np.abs(c0 - c0_coarse).max(), np.abs(c1 - c1_coarse).max())
        if drift > CONV_TOL:
            raise QuadratureError(
                f"conditional CDFs changed by {drift:.3e} when doubling the quadrature "
                f"from {nodes} nodes; increase quadrature_nodes")
    labels = tuple(format(z, "g") for z in z_values)
    return ObservedLaw(y_grid, labels, ndtr(z_values), c0, c1)


def build_observed_law(spec: DgpSpec) -> ObservedLaw:
    """Analytic observables for the design: propensities and arm CDFs per z."""
    return _build_law(spec.rho, spec.z_half_width, spec.dof, spec.y_grid,
                      spec.z_values, spec.quadrature_nodes)


def nsm_violating_law(spec: DgpSpec) -> ObservedLaw:
    """Same design with the selection loading flipped to +|rho|.

    Flipping the sign of U in the outcome makes the outcome heterogeneity
    stochastically increasing in the selection unobservable, so the monotone
    functional inequalities fail; used to exercise the diagnostics.
    """
    return _build_law(abs(spec.rho), spec.z_half_width, spec.dof, spec.y_grid,
                      spec.z_values, spec.quadrature_nodes)


def mtr_violating_law(spec: DgpSpec) -> ObservedLaw:
    """Same design with Y1 = Y0 - eta, so treatment hurts everyone."""
    return _build_law(spec.rho, spec.z_half_width, spec.dof, spec.y_grid,
                      spec.z_values, spec.quadrature_nodes, eta_sign=-1.0)


def build_truth(spec: DgpSpec, pairs=()) -> DgpTruth:
    """Ground-truth distributions implied by the design.

    F0 is normal with variance 1 + rho^2; F1 convolves it with the shock;
    the treatment effect is the shock itself, so its CDF is chi-squared(dof);
    the joint CDF conditions on the shock: P(Y0<=y0, Y0<=y1-s) integrated
    against the shock density.
    """
    y = spec.y_grid.points
    sig = float(np.sqrt(1.0 + spec.rho ** 2))
    s, w = _shock_nodes(spec.dof, 2 * spec.quadrature_nodes)
    f0 = ndtr(y / sig)
    f1 = ndtr((y[None, :] - s[:, None]) / sig).T @ w
    s_c, w_c = _shock_nodes(spec.dof, spec.quadrature_nodes)
    f1_coarse = ndtr((y[None, :] - s_c[:, None]) / sig).T @ w_c
    drift = np.abs(f1 - f1_coarse).max()
    if drift > CONV_TOL:
        raise QuadratureError(f"truth quadrature moved by {drift:.3e} on doubling")
    joint = np.array([
        float((ndtr(np.minimum(y0, y1 - s) / sig) * w).sum()) for (y0, y1) in pairs
    ])
    dte = stats.chi2.cdf(spec.delta_grid.points, df=spec.dof)
    return DgpTruth(
        StepCdf(spec.y_grid, np.clip(f0, 0, 1)),
        StepCdf(spec.y_grid, np.clip(f1, 0, 1)),
        tuple((float(a), float(b)) for a, b in pairs),
        joint,
        StepCdf(spec.delta_grid, dte),
    )


def monte_carlo_law(spec: DgpSpec, draws: int, seed: int, pairs=(),
                    chunk: int = 250_000) -> tuple[ObservedLaw, DgpTruth]:
    """Simulation counterpart of the analytic law and truth.

    Only the structural draws (U, eps, eta) are needed: the instrument enters
    every conditional object through the threshold U <= z alone, so each z on
    the grid is conditioned on directly.  Accumulation is chunked with
    spawned substreams and reduced in a fixed order, so results are
    bitwise-reproducible for a given seed.
    """
    if draws < 100_000:
        raise ValueError("need at least 1e5 draws for a usable oracle law")
    y = spec.y_grid.points
    dgrid = spec.delta_grid.points
    zs = spec.z_values
    ny, nz = len(y), len(zs)
    n_chunks = (draws + chunk - 1) // chunk
    streams = np.random.SeedSequence(seed).spawn(n_chunks)

    cnt1 = np.zeros((nz, ny + 1))
    cnt0 = np.zeros((nz, ny + 1))
    n1 = np.zeros(nz)
    f0_cnt = np.zeros(ny + 1)
    f1_cnt = np.zeros(ny + 1)
    dte_cnt = np.zeros(len(dgrid) + 1)
    joint_cnt = np.zeros(len(pairs))
    total = 0
    for c in range(n_chunks):
        m = min(chunk, draws - total)
        rng = np.random.default_rng(streams[c])
        u = rng.standard_normal(m)
        eps = rng.standard_normal(m)
        eta = rng.chisquare(spec.dof, m)
        y0 = spec.rho * u + eps
        y1 = y0 + eta
        i0 = np.searchsorted(y, y0, side="right")
        i1 = np.searchsorted(y, y1, side="right")
        f0_cnt += np.bincount(i0, minlength=ny + 1)
        f1_cnt += np.bincount(i1, minlength=ny + 1)
        dte_cnt += np.bincount(np.searchsorted(dgrid, eta, side="right"),
                               minlength=len(dgrid) + 1)
        for j, (a, b) in enumerate(pairs):
            joint_cnt[j] += int(np.count_nonzero((y0 <= a) & (y1 <= b)))
        for i, z in enumerate(zs):
            sel = u <= z
            n1[i] += int(np.count_nonzero(sel))
            cnt1[i] += np.bincount(i1[sel], minlength=ny + 1)
            cnt0[i] += np.bincount(i0[~sel], minlength=ny + 1)
        total += m

    n0 = total - n1
    cond1 = np.cumsum(cnt1, axis=1)[:, :ny] / np.maximum(n1, 1.0)[:, None]
    cond0 = np.cumsum(cnt0, axis=1)[:, :ny] / np.maximum(n0, 1.0)[:, None]
    labels = tuple(format(z, "g") for z in zs)
    law = ObservedLaw(spec.y_grid, labels, n1 / total, np.clip(cond0, 0, 1), np.clip(cond1, 0, 1))
    truth = DgpTruth(
        StepCdf(spec.y_grid, np.cumsum(f0_cnt)[:ny] / total),
        StepCdf(spec.y_grid, np.cumsum(f1_cnt)[:ny] / total),
        tuple((float(a), float(b)) for a, b in pairs),
        joint_cnt / total,
        StepCdf(spec.delta_grid, np.cumsum(dte_cnt)[:len(dgrid)] / total),
    )
    return law, truth
