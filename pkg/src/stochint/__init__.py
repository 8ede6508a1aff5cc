"""Stochastic-intervention effect estimation for binary treatments.

Estimates the counterfactual mean outcome when every unit's treatment odds
are multiplied by a degree delta, via a cross-fitted doubly-robust influence
function, and searches per-unit degrees that maximize the summed influence
reward with a derivative-free random-search optimizer.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .baselines import (
    ATE_BASELINE_KINDS,
    aipw_from_values,
    estimate_ate_baseline,
    fit_sma,
    ipw_from_values,
    random_policy,
    sma_policy,
    sma_policy_from_model,
)
from .data import (
    Dataset,
    FoldAssignment,
    GroundTruth,
    SyntheticSpec,
    kfold_split,
    load_csv,
    make_synthetic,
    train_test_split,
    write_csv,
)
from .errors import (
    DegenerateDesign,
    DegenerateFold,
    DomainError,
    EmptyArm,
    InvalidSpec,
    LengthMismatch,
    MissingColumn,
    NoGroundTruth,
    NonBinaryTreatment,
    NonConvergence,
    NonFiniteReward,
    NonFiniteValue,
    NumericalError,
    PositivityWarning,
    SingleClass,
    StochintError,
    TooFewUnits,
    ValidationError,
)
from .estimator import (
    InfluenceArrays,
    InfluenceRecord,
    PreparedInfluence,
    SieReport,
    StochasticDegree,
    ate_error,
    estimate_sie,
    influence,
    m_values,
    prepare_influence,
    psi_oracle,
    stochastic_propensity,
)
from .nuisance import (
    BasisExpansion,
    BoostedStumpsOutcome,
    MeanOutcome,
    NuisancePair,
    NuisanceSpec,
    OutcomeConfig,
    OutcomeModel,
    PropensityModel,
    RidgeOutcome,
    Standardizer,
    cross_fit,
    fit_outcome,
    fit_pair,
    fit_propensity,
    make_basis,
    outcome_from_json,
)
from .optimizer import (
    DeltaParam,
    OptimizeResult,
    RsConfig,
    StepRecord,
    delta_to_policy,
    optimize,
    policy_value,
    reward,
)
