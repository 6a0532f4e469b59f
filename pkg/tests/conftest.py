import numpy as np
import pytest

from longswap.cohort import CohortSpec
from longswap.mortality import (
    ApciParameters,
    MortalityScenarioSet,
    estimate_curve,
    load_fixture_parameters,
    load_fixture_scenarios,
)

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixture_scenarios():
    return load_fixture_scenarios()


@pytest.fixture(scope="session")
def fixture_curve(fixture_scenarios):
    return estimate_curve(fixture_scenarios)


@pytest.fixture(scope="session")
def fixture_params():
    return load_fixture_parameters()


@pytest.fixture
def base_cohort():
    return CohortSpec(65, 10_000, 35)


def flat_params(ages=(60, 70), level=-4.0, **overrides) -> ApciParameters:
    """Parameters with every source of randomness and trend switched off."""
    n = ages[1] - ages[0] + 1
    kw = dict(
        age_range=ages,
        beta1=np.full(n, level),
        beta2=np.zeros(n),
        kappa_last=0.0,
        sigma_kappa=0.0,
        theta={},
        sigma_omega=np.zeros(n),
        h_bar=2000.0,
        base_year=2020,
    )
    kw.update(overrides)
    return ApciParameters(**kw)


def scenario_set(paths, age=65) -> MortalityScenarioSet:
    return MortalityScenarioSet(age, np.atleast_2d(np.asarray(paths, dtype=float)))
