"""
Survivor-count moments for a homogeneous annuitant cohort.

Conditional on a scenario path, survivors thin binomially year by year. Under a
finite scenario mixture the first and second moments follow from the law of total
covariance: a binomial term averaged over paths plus the across-path covariance
of the multi-year survivals scaled by ``l0**2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import HorizonError, ValidationError
from .mortality import MortalityScenarioSet, SurvivalCurve, estimate_curve

MomentMode = Literal["mixture", "point-estimate"]
_BLOCK = 1 << 16


@dataclass(frozen=True)
class CohortSpec:
    initial_age: int
    initial_count: int
    horizon: int

    def __post_init__(self):
        if self.initial_count < 1:
            raise ValidationError(f"initial count must be >= 1, got {self.initial_count}")
        if self.horizon < 1:
            raise ValidationError(f"horizon must be >= 1, got {self.horizon}")


@dataclass(frozen=True)
class PriorMeasure:
    """Power tilt of survival probabilities; ``lam == 1`` is the benchmark."""

    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError(f"lambda must be positive, got {self.lam}")

    @property
    def is_benchmark(self) -> bool:
        return self.lam == 1.0

    @property
    def label(self) -> str:
        return "benchmark" if self.is_benchmark else f"lambda={self.lam:g}"


BENCHMARK = PriorMeasure(1.0)


@dataclass(frozen=True)
class CohortMoments:
    mean: np.ndarray
    cov: np.ndarray
    measure: PriorMeasure
    mode: MomentMode


def tilt(scenarios: MortalityScenarioSet, prior: PriorMeasure) -> MortalityScenarioSet:
    """Raise every one-year survival to the power ``prior.lam``."""
    if prior.lam == 1.0:
        return scenarios
    return MortalityScenarioSet(
        scenarios.initial_age, scenarios.paths**prior.lam, scenarios.seed, scenarios.provenance
    )


def point_estimate_set(curve: SurvivalCurve, basis: Literal["multi_year", "one_year"] = "multi_year"
                       ) -> MortalityScenarioSet:
    """Single deterministic path built from a point-estimate curve.

    With ``basis="multi_year"`` the path's products reproduce ``curve.multi_year``
    exactly (the static-contract convention); with ``"one_year"`` the path is the
    averaged one-year survivals used by the dynamic contract.
    """
    if basis == "multi_year":
        multi = curve.multi_year
        q = multi / np.concatenate([[1.0], multi[:-1]])
        q = np.minimum(q, 1.0)
    elif basis == "one_year":
        q = curve.one_year
    else:
        raise ValidationError(f"unknown basis {basis!r}")
    return MortalityScenarioSet(curve.initial_age, q[None, :], provenance="point-estimate")


def _check(spec: CohortSpec, scenarios: MortalityScenarioSet) -> np.ndarray:
    if scenarios.horizon < spec.horizon:
        raise HorizonError(f"scenario horizon {scenarios.horizon} < cohort horizon {spec.horizon}")
    if scenarios.initial_age != spec.initial_age:
        raise ValidationError(
            f"scenario age {scenarios.initial_age} does not match cohort age {spec.initial_age}"
        )
    return scenarios.paths[:, : spec.horizon]


def chain_moments(l0: int, paths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of ``(l_0, l_1, ..., l_T)`` under an equal-weight path mixture.

    For ``i <= j`` with per-path multi-year survival ``P``:
    ``Cov(l_i, l_j) = l0 * E[P_j (1 - P_i)] + l0**2 * Cov_k(P_i, P_j)``.
    """
    K, T = paths.shape
    P = np.hstack([np.ones((K, 1)), np.cumprod(paths, axis=1)])
    Pm = P.mean(axis=0)
    EPP = P.T @ P / K
    idx = np.arange(T + 1)
    later = np.maximum.outer(idx, idx)
    cond = l0 * (Pm[later] - EPP)
    syst = float(l0) ** 2 * (EPP - np.outer(Pm, Pm))
    cov = cond + syst
    cov = 0.5 * (cov + cov.T)
    cov[0, :] = 0.0
    cov[:, 0] = 0.0
    return l0 * Pm, cov


def cohort_mean(spec: CohortSpec, scenarios: MortalityScenarioSet, prior: PriorMeasure = BENCHMARK
                ) -> np.ndarray:
    """Expected survivors ``E[l_t]`` for ``t = 1..T``."""
    q = _check(spec, scenarios) ** prior.lam
    return spec.initial_count * np.cumprod(q, axis=1).mean(axis=0)


def cohort_covariance(spec: CohortSpec, scenarios: MortalityScenarioSet, prior: PriorMeasure = BENCHMARK,
                      mode: MomentMode = "mixture") -> CohortMoments:
    """Exact mean vector and covariance matrix of ``l_1..l_T`` under ``prior``.

    In ``"point-estimate"`` mode the scenario set is first collapsed to its
    averaged multi-year curve, leaving binomial risk only.
    """
    if mode == "point-estimate":
        _check(spec, scenarios)
        scenarios = point_estimate_set(estimate_curve(scenarios.truncate(spec.horizon)))
    elif mode != "mixture":
        raise ValidationError(f"unknown moment mode {mode!r}")
    q = _check(spec, scenarios) ** prior.lam
    mean, cov = chain_moments(spec.initial_count, q)
    return CohortMoments(mean=mean[1:], cov=cov[1:, 1:], measure=prior, mode=mode)


def sample_cohort_paths(spec: CohortSpec, scenarios: MortalityScenarioSet, prior: PriorMeasure,
                        N: int, seed: int) -> np.ndarray:
    """Simulate N survivor chains, returning an (N, T) integer matrix of ``l_1..l_T``.

    Each chain picks a scenario path uniformly, then thins binomially. Chains are
    generated in fixed-size blocks, each with its own Philox stream keyed by
    ``(seed, block)``, so the output does not depend on how blocks are scheduled.
    """
    if N < 1:
        raise ValidationError(f"chain count must be >= 1, got {N}")
    q = _check(spec, scenarios) ** prior.lam
    K, T = q.shape
    out = np.empty((N, T), dtype=np.int64)
    for b, start in enumerate(range(0, N, _BLOCK)):
        n = min(_BLOCK, N - start)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(b,))))
        k = rng.integers(K, size=n) if K > 1 else np.zeros(n, dtype=np.int64)
        alive = np.full(n, spec.initial_count, dtype=np.int64)
        for t in range(T):
            alive = rng.binomial(alive, q[k, t])
            out[start:start + n, t] = alive
    return out


def write_moments_csv(moments: CohortMoments, path: str | Path) -> None:
    """One row per year: ``t, mean, cov[t, t], cov[t, t+1], ...``."""
    T = moments.mean.size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "mean"] + [f"cov_t_{j}" for j in range(1, T + 1)])
        for i in range(T):
            row = [i + 1, repr(float(moments.mean[i]))]
            row += [""] * i + [repr(float(v)) for v in moments.cov[i, i:]]
            writer.writerow(row)
