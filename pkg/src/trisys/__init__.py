"""Partial-identification bounds for binary-selection triangular systems.

The engine works on discretized observables: a finite instrument grid with
propensity scores and conditional outcome CDFs per treatment arm.  From those
it assembles sharp bounds on the marginal distributions of the potential
outcomes, their joint distribution, and the distribution of treatment effects
(DTE), under six restriction regimes (worst case, stochastic monotonicity of
the outcome heterogeneity in the selection unobservable, conditional positive
quadrant dependence, monotone treatment response, and the two compatible
combinations).
"""

from .grids import (
    ValueGrid,
    StepCdf,
    ObservedLaw,
    Regime,
    REGIMES,
    Violation,
    eval_cdf,
    monotone_envelope,
    validate_observed_law,
    law_from_dict,
    law_to_dict,
)
from .copulas import (
    MarginalPair,
    DteBound,
    frechet_hoeffding,
    makarov_dte,
    nelsen_constrained,
    mtr_joint_bounds,
    mtr_dte_lower,
    williamson_downs_check,
    InfeasibleThetaError,
)
from .bands import CounterfactualBand, BandSet, band_matrices, worst_bands, nsm_bands, mtr_bands
from .bounds import (
    MarginalBound,
    JointBound,
    QuantileBound,
    ConfigurationError,
    marginal_bounds,
    joint_bounds,
    dte_bounds,
    quantile_bounds,
)
from .diagnostics import DiagnosticReport, test_nsm, test_mtr_dominance, test_dte_crossing
from .dgp import DgpSpec, DgpTruth, QuadratureError, build_observed_law, build_truth, monte_carlo_law
from .oracle import OracleVerdict, check_containment, exhaustive_chain_check, discrete_copula_sharpness_probe

__version__ = "0.1.0"

__all__ = [
    "ValueGrid", "StepCdf", "ObservedLaw", "Regime", "REGIMES", "Violation",
    "eval_cdf", "monotone_envelope", "validate_observed_law", "law_from_dict", "law_to_dict",
    "MarginalPair", "DteBound", "frechet_hoeffding", "makarov_dte", "nelsen_constrained",
    "mtr_joint_bounds", "mtr_dte_lower", "williamson_downs_check", "InfeasibleThetaError",
    "CounterfactualBand", "BandSet", "band_matrices", "worst_bands", "nsm_bands", "mtr_bands",
    "MarginalBound", "JointBound", "QuantileBound", "ConfigurationError",
    "marginal_bounds", "joint_bounds", "dte_bounds", "quantile_bounds",
    "DiagnosticReport", "test_nsm", "test_mtr_dominance", "test_dte_crossing",
    "DgpSpec", "DgpTruth", "QuadratureError", "build_observed_law", "build_truth", "monte_carlo_law",
    "OracleVerdict", "check_containment", "exhaustive_chain_check", "discrete_copula_sharpness_probe",
]
