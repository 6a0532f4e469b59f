"""Stackelberg pricing of static and dynamic longevity swaps."""

from .cohort import (
    BENCHMARK,
    CohortMoments,
    CohortSpec,
    PriorMeasure,
    cohort_covariance,
    cohort_mean,
    point_estimate_set,
    sample_cohort_paths,
    tilt,
)
from .contract import (
    ContractSpec,
    SurplusSample,
    dynamic_fixed_payment,
    static_fixed_payments,
    terminal_surpluses,
)
from .dynamic import (
    DynamicSolution,
    dynamic_buyer_value,
    dynamic_equilibrium,
    dynamic_seller_value,
    dynamic_welfare_gains,
    strategy_value,
)
from .errors import BoundError, CorruptFileError, HorizonError, LongswapError, ValidationError
from .mortality import (
    ApciParameters,
    MortalityScenarioSet,
    SurvivalCurve,
    estimate_curve,
    load_parameters,
    load_scenarios,
    save_scenarios,
    simulate_scenarios,
)
from .stackelberg import (
    AmbiguitySet,
    EquilibriumSolution,
    Market,
    buyer_welfare_profile,
    lambda_interval,
    life_expectancy,
    optimize_eta,
    seller_objective,
    worst_case_objective,
)
from .static import StaticSolution, static_best_response, static_values, static_welfare_gains

__version__ = "0.1.0"
