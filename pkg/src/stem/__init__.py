"""Two-stage stochastic electricity market clearing with two-stage VCG settlement."""

from .model import (
    FirstStageDecision,
    InfeasibleVolumeError,
    MarketConfig,
    ProducerType,
    SecondStageDecision,
    SettlementRecord,
    TypeDistribution,
    first_stage_cost,
    producer_cost,
    second_stage_cost,
    stage2_objective,
    system_cost,
    validate_config,
)
from .sampling import NotPSDError, ScenarioSet, cholesky, sample_scenarios
from .stage1 import (
    ContinuousSolution,
    Stage1Solution,
    TooManyProducersError,
    optimize_continuous,
    solve_first_stage,
)
from .stage2 import Stage2Solution, UnboundedSecondStageError, solve_second_stage
from .payments import (
    CounterfactualCache,
    build_counterfactuals,
    first_stage_payment,
    second_stage_payment,
    settle,
    settle_batch,
    single_stage_vcg,
    utility,
)

__version__ = "0.1.0"

__all__ = [
    "FirstStageDecision",
    "InfeasibleVolumeError",
    "MarketConfig",
    "ProducerType",
    "SecondStageDecision",
    "SettlementRecord",
    "TypeDistribution",
    "first_stage_cost",
    "producer_cost",
    "second_stage_cost",
    "stage2_objective",
    "system_cost",
    "validate_config",
    "NotPSDError",
    "ScenarioSet",
    "cholesky",
    "sample_scenarios",
    "ContinuousSolution",
    "Stage1Solution",
    "TooManyProducersError",
    "optimize_continuous",
    "solve_first_stage",
    "Stage2Solution",
    "UnboundedSecondStageError",
    "solve_second_stage",
    "CounterfactualCache",
    "build_counterfactuals",
    "first_stage_payment",
    "second_stage_payment",
    "settle",
    "settle_batch",
    "single_stage_vcg",
    "utility",
    "__version__",
]
