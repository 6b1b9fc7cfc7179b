"""Doubly robust estimation of causal average hazards from right-censored data."""

from .curves import (
    AhSummary,
    StepCumulativeHazard,
    StepSurvivalCurve,
    average_hazard,
    isotonic_project,
    km_estimate,
    log_ah_ratio,
    nelson_aalen,
    rmst,
)
from .data import Dataset, ObservedUnit, read_dataset_csv, write_dataset_csv
from .estimators import (
    AhEstimate,
    CrossFitPlan,
    ah_dml,
    cox_marginal,
    g_computation,
    marginalized_conditional_rate,
    wald_interval,
)
from .influence import (
    drift_bias,
    eif_aggregates,
    hadamard_derivative_check,
    survival_eif,
    theta_eif,
    theta_eif_expanded,
)
from .nuisance import (
    LearnerConfig,
    LearnerSpec,
    NuisanceTriple,
    fit_cox,
    fit_parametric_aft,
    fit_propensity,
    select_learner,
)
from .simulate import (
    DgmSpec,
    TruthRecord,
    make_dgm,
    oracle_nuisances,
    propensity_true,
    sample_covariates,
    sample_dataset,
    sample_ph,
    sample_warp,
    truth_theta,
)

__version__ = "0.1.0"
