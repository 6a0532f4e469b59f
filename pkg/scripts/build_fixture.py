"""Regenerate the bundled APCI parameter file and scenario set.

The parameters are synthetic: age-specific period improvement, a mild cohort
bump and random-walk improvement noise on top of a level ``beta1`` that is
solved for so the simulated 65-year-old cohort follows a target hazard. The
target log hazard is piecewise linear in age, steepening through the late
seventies and flattening in the nineties; its knots were chosen offline.

    python scripts/build_fixture.py
"""

from dataclasses import replace
from pathlib import Path

import numpy as np

from longswap.mortality import (
    ApciParameters,
    estimate_curve,
    save_parameters,
    save_scenarios,
    simulate_scenarios,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "longswap" / "data"
SEED = 20240521
AGE, HORIZON, PATHS = 65, 35, 2000
AGES = np.arange(20, 101)

# target log one-year hazard: value at AGE, then slopes on equal segments to AGE + HORIZON - 1
HAZARD_START = -4.3965
HAZARD_SLOPES = np.array([0.0469, 0.1847, 0.0997, 0.0200, 0.0321])
CALIBRATION_ROUNDS = 4


def target_log_hazard() -> np.ndarray:
    knots = np.linspace(0.0, HORIZON - 1, HAZARD_SLOPES.size + 1)
    values = HAZARD_START + np.concatenate([[0.0], np.cumsum(HAZARD_SLOPES * np.diff(knots))])
    return np.interp(np.arange(HORIZON), knots, values)


def base_parameters(beta1: np.ndarray) -> ApciParameters:
    improvement = np.interp(AGES, [20, 65, 100], [0.025, 0.018, 0.006])
    cohorts = np.arange(1880, 2001)
    theta = -0.04 * np.exp(-(((cohorts - 1932) / 8.0) ** 2))
    return ApciParameters(
        age_range=(20, 100),
        beta1=np.round(beta1, 6),
        beta2=np.round(-improvement, 6),
        kappa_last=0.0,
        sigma_kappa=0.012,
        theta={int(c): round(float(v), 6) for c, v in zip(cohorts, theta)},
        sigma_omega=np.round(np.interp(AGES, [20, 65, 100], [0.06, 0.025, 0.04]), 6),
        h_bar=1988.0,
        base_year=2020,
        fitted_years=(1956, 2020),
    )


def fixture_parameters() -> ApciParameters:
    """Gompertz below AGE; above it, beta1 is solved against the target hazard."""
    params = base_parameters(-4.25 + 0.118 * (AGES - 65))
    target = target_log_hazard()
    idx = np.arange(HORIZON) + params.age_index(AGE)
    years = params.base_year + 1 + np.arange(HORIZON)
    offset = params.beta2[idx] * (years - params.h_bar) + params.cohort_effect(params.base_year + 1 - AGE)
    beta1 = params.beta1.copy()
    beta1[idx] = target - offset
    beta1[idx[-1] + 1:] = beta1[idx[-1]] + HAZARD_SLOPES[-1] * np.arange(1, AGES.size - idx[-1])
    # one-year hazards of the mean survival absorb the noise convexity; correct for it
    for _ in range(CALIBRATION_ROUNDS):
        params = base_parameters(beta1)
        curve = estimate_curve(simulate_scenarios(params, AGE, HORIZON, PATHS, SEED))
        beta1[idx] += target - np.log(-np.log(curve.one_year))
    return base_parameters(beta1)


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    params = fixture_parameters()
    save_parameters(params, DATA / "fixture_params.json")
    scenarios = simulate_scenarios(params, AGE, HORIZON, PATHS, SEED)
    save_scenarios(scenarios, DATA / "fixture_scenarios.lswp")
    curve = estimate_curve(scenarios)
    print(f"e_{AGE} = {curve.life_expectancy():.3f} over {HORIZON} years, K={PATHS}, seed={SEED}")


if __name__ == "__main__":
    main()
