"""Bounds on the two counterfactual sub-distribution functions.

For each instrument value z the engine needs lower/upper bounds on
P(Y0 <= y, D=1 | z) (the "01" pair, mass p(z)) and P(Y1 <= y, D=0 | z)
(the "10" pair, mass 1 - p(z)).  The worst-case bands use only the extreme
propensities; stochastic monotonicity of the outcome heterogeneity in the
selection unobservable tightens the 10-lower and 01-upper bands; monotone
treatment response tightens the 01-lower and 10-upper bands.  The remaining
two bands are not improved by stochastic monotonicity, so the monotone
regimes reuse the worst-case arrays for them (a log note records the alias).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .grids import ObservedLaw, Regime

log = logging.getLogger(__name__)

DEGENERATE_EPS = 1e-12  # propensity gap below which the degenerate branch applies

_alias_noted = False


class BandKind(str, Enum):
    L01_WST = "L01_WST"
    U01_WST = "U01_WST"
    L10_WST = "L10_WST"
    U10_WST = "U10_WST"
    L10_SM = "L10_SM"
    U01_SM = "U01_SM"
    L01_MTR = "L01_MTR"
    U10_MTR = "U10_MTR"


@dataclass(frozen=True)
class CounterfactualBand:
    z: str
    kind: BandKind
    values: np.ndarray


@dataclass(frozen=True)
class BandSet:
    """All eight band matrices for one law, shape (n_z, n_y) each."""

    law: ObservedLaw
    l01_wst: np.ndarray
    u01_wst: np.ndarray
    l10_wst: np.ndarray
    u10_wst: np.ndarray
    l10_sm: np.ndarray
    u01_sm: np.ndarray
    l01_mtr: np.ndarray
    u10_mtr: np.ndarray

    def select(self, regime: Regime) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Band choice (L01, U01, L10, U10) for a restriction regime."""
        global _alias_noted
        l01 = self.l01_mtr if regime.uses_mtr else self.l01_wst
        u10 = self.u10_mtr if regime.uses_mtr else self.u10_wst
        if regime.uses_nsm:
            u01, l10 = self.u01_sm, self.l10_sm
            if not regime.uses_mtr and not _alias_noted:
                log.info("stochastic monotonicity leaves the 10-upper and 01-lower bands "
                         "unimproved; worst-case arrays are reused for them")
                _alias_noted = True
        else:
            u01, l10 = self.u01_wst, self.l10_wst
        return l01, u01, l10, u10


def band_matrices(law: ObservedLaw, clamp: bool = True) -> BandSet:
    """Compute every band for every z at once.

    With ``clamp`` the bands are clamped to their feasible envelopes
    ([0, p(z)] for the 01 pair, [0, 1-p(z)] for the 10 pair) and rearranged to
    be nondecreasing in y; on coarse grids the raw formulas can drift outside,
    and neither operation can exclude a feasible sub-distribution function.
    ``clamp=False`` returns the raw formula values (the worst-case width
    identities U01-L01 = p_low and U10-L10 = 1-p_bar hold exactly there).
    """
    p = law.propensity
    p_low, p_bar = law.p_low, law.p_bar
    lam0 = law.cond0[law.i_low] * (1.0 - p_low)   # P(Y0<=y, U > p_low)
    lam1 = law.cond1[law.i_bar] * p_bar           # P(Y1<=y, U <= p_bar)
    sub0, sub1 = law.sub0, law.sub1

    l01_wst = lam0[None, :] - sub0
    u01_wst = l01_wst + p_low
    l10_wst = lam1[None, :] - sub1
    u10_wst = l10_wst + (1.0 - p_bar)

    l10_sm = np.zeros_like(l10_wst)
    u01_sm = np.zeros_like(u01_wst)
    for i in range(law.n_z):
        gap_bar = p_bar - p[i]
        gap_low = p[i] - p_low
        if gap_bar > DEGENERATE_EPS:
            l10_sm[i] = (lam1 - sub1[i]) * ((1.0 - p[i]) / gap_bar)
        if gap_low > DEGENERATE_EPS:
            u01_sm[i] = (lam0 - sub0[i]) * (p[i] / gap_low)
        else:
            u01_sm[i] = p[i]

    l01_mtr = l01_wst + (law.cond1[law.i_low] * p_low)[None, :]
    u10_mtr = l10_wst + (law.cond0[law.i_bar] * (1.0 - p_bar))[None, :]

    if clamp:
        cap01 = p[:, None]
        cap10 = (1.0 - p)[:, None]
        l01_wst = _shape(l01_wst, cap01, "lower")
        u01_wst = _shape(u01_wst, cap01, "upper")
        l10_wst = _shape(l10_wst, cap10, "lower")
        u10_wst = _shape(u10_wst, cap10, "upper")
        l10_sm = _shape(l10_sm, cap10, "lower")
        u01_sm = _shape(u01_sm, cap01, "upper")
        l01_mtr = _shape(l01_mtr, cap01, "lower")
        u10_mtr = _shape(u10_mtr, cap10, "upper")

    return BandSet(law, l01_wst, u01_wst, l10_wst, u10_wst, l10_sm, u01_sm, l01_mtr, u10_mtr)


def _shape(mat: np.ndarray, cap: np.ndarray, direction: str) -> np.ndarray:
    """Clamp rows to [0, cap] and make them nondecreasing in y."""
    out = np.minimum(np.maximum(mat, 0.0), cap)
    if direction == "lower":
        return np.maximum.accumulate(out, axis=1)
    return np.minimum.accumulate(out[:, ::-1], axis=1)[:, ::-1]


def _bands_at(law: ObservedLaw, z: str, kinds: list[BandKind], bs: BandSet) -> list[CounterfactualBand]:
    i = law.z_index(z)
    arrays = {
        BandKind.L01_WST: bs.l01_wst, BandKind.U01_WST: bs.u01_wst,
        BandKind.L10_WST: bs.l10_wst, BandKind.U10_WST: bs.u10_wst,
        BandKind.L10_SM: bs.l10_sm, BandKind.U01_SM: bs.u01_sm,
        BandKind.L01_MTR: bs.l01_mtr, BandKind.U10_MTR: bs.u10_mtr,
    }
    return [CounterfactualBand(str(z), k, arrays[k][i].copy()) for k in kinds]


def worst_bands(law: ObservedLaw, z: str, clamp: bool = True):
    """Worst-case bands (L01, U01, L10, U10) at one instrument value."""
    bs = band_matrices(law, clamp=clamp)
    return tuple(_bands_at(law, z, [BandKind.L01_WST, BandKind.U01_WST,
                                    BandKind.L10_WST, BandKind.U10_WST], bs))


def nsm_bands(law: ObservedLaw, z: str, clamp: bool = True):
    """Stochastic-monotonicity-improved bands (L10_SM, U01_SM) at one z."""
    bs = band_matrices(law, clamp=clamp)
    return tuple(_bands_at(law, z, [BandKind.L10_SM, BandKind.U01_SM], bs))


def mtr_bands(law: ObservedLaw, z: str, clamp: bool = True):
    """Monotone-treatment-response-improved bands (L01_MTR, U10_MTR) at one z."""
    bs = band_matrices(law, clamp=clamp)
    return tuple(_bands_at(law, z, [BandKind.L01_MTR, BandKind.U10_MTR], bs))
