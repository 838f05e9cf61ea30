"""Relative-information measures for hypothesis tests with incomplete data.

Given a model linking observed data to its hypothetical complete version,
this package quantifies how much of the complete-data evidence for a
specific test survives in the observed data: likelihood-based measures for
large samples, posterior-variability measures for small ones, and the
diagnostic identities and expansions that tie the two families together.
"""

from .bayes import (
    BayesFactorResult,
    BayesValue,
    Bi0Result,
    PriorSpec,
    ShrinkReport,
    bayes_factor_ob,
    compute_bi0,
    compute_bi0_tilting,
    compute_bi1,
    compute_bi1_covform,
    compute_bi2,
    compute_bi_s,
    shrink_convergence,
)
from .diagnostics import (
    ExpansionCheck,
    IdentityReport,
    RiEResult,
    compute_ri_e,
    em_identity_suite,
    expansion_check_ri0,
    expansion_check_ri1,
)
from .em_engine import (
    FitConfig,
    FitResult,
    InfoDecomposition,
    fit_mle,
    fit_null_mle,
    info_decomposition,
    maximize_q,
    null_point,
    q_derivative,
)
from .large_sample import (
    CompletedStatRatio,
    LargeSampleReport,
    RiResult,
    combine_arithmetic,
    combine_harmonic,
    completed_stat_ratio,
    compute_ri0,
    compute_ri1,
    compute_ri_half,
    large_sample_report,
    per_unit_terms,
    ri_curve,
)
from .model_api import (
    AVERAGE_OVER_PRIOR,
    FIX_AT_NULL_MLE,
    INTEREST,
    NUISANCE,
    DataError,
    DegenerateTestError,
    HeavyTailError,
    HypothesisSpec,
    IncompleteModel,
    MCConfig,
    MissinfoError,
    NumericalError,
    ParamPoint,
    ScalarView,
    UnitDataset,
    UnsupportedOperationError,
    dataset_loglik_obs,
    dataset_q,
)

__version__ = "0.1.0"
