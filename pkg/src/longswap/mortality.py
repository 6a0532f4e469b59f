"""
Stochastic mortality scenarios from an age-period-cohort-improvement model.

Log death rates are ``beta1[age] + beta2[age] * (year - h_bar) + kappa + theta[cohort]
+ sigma_omega[age] * omega`` with ``kappa`` a random walk started from the last
fitted value. Each scenario path stores one-year survival probabilities
``q = exp(-m)`` for a single cohort; multi-year survival is the product along the
path.

Every path draws from its own counter-based Philox stream keyed by ``(seed, k)``,
so generating paths in any order or in parallel gives identical output.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import CorruptFileError, HorizonError, ValidationError

FIXTURE_SEED = 20240521
MAGIC = b"LSWP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIIQ")

PathLike = Union[str, Path]


# =============================================================================
# Domain types
# =============================================================================

@dataclass(frozen=True)
class ApciParameters:
    """Already-estimated APCI parameters for one population.

    Per-age arrays are indexed by ``age - age_range[0]``. ``theta`` maps a birth
    year to its cohort effect; cohorts absent from the mapping get 0.
    """

    age_range: tuple[int, int]
    beta1: np.ndarray
    beta2: np.ndarray
    kappa_last: float
    sigma_kappa: float
    theta: Mapping[int, float]
    sigma_omega: np.ndarray
    h_bar: float
    base_year: int
    fitted_years: tuple[int, int] | None = None

    def __post_init__(self):
        lo, hi = self.age_range
        if hi < lo:
            raise ValidationError(f"empty age range {self.age_range}")
        n_ages = hi - lo + 1
        for name in ("beta1", "beta2", "sigma_omega"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n_ages,):
                raise ValidationError(
                    f"{name} has shape {arr.shape}, expected ({n_ages},) for ages {lo}..{hi}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)
        scalars = (self.kappa_last, self.sigma_kappa, self.h_bar)
        if not all(math.isfinite(v) for v in scalars):
            raise ValidationError("non-finite scalar parameter")
        if not all(math.isfinite(v) for v in self.theta.values()):
            raise ValidationError("theta contains non-finite values")
        if self.sigma_kappa < 0 or np.any(self.sigma_omega < 0):
            raise ValidationError("standard deviations must be non-negative")
        if self.fitted_years is not None:
            y0, y1 = self.fitted_years
            if not y0 <= self.h_bar <= y1:
                raise ValidationError(f"h_bar={self.h_bar} outside fitted years {self.fitted_years}")
        object.__setattr__(self, "theta", {int(k): float(v) for k, v in self.theta.items()})

    def age_index(self, age: int) -> int:
        return int(age) - self.age_range[0]

    def cohort_effect(self, birth_year: int) -> float:
        return self.theta.get(int(birth_year), 0.0)


@dataclass(frozen=True)
class MortalityScenarioSet:
    """K simulated paths of one-year survival probabilities for one cohort.

    ``paths[k, t]`` is the probability that a life aged ``initial_age + t`` at
    time ``t`` survives to ``t + 1`` on path ``k``.
    """

    initial_age: int
    paths: np.ndarray
    seed: int = 0
    provenance: str = "simulated-from-params"

    def __post_init__(self):
        paths = np.asarray(self.paths, dtype=np.float64)
        if paths.ndim != 2 or paths.shape[0] < 1 or paths.shape[1] < 1:
            raise ValidationError(f"paths must be a non-empty K x T matrix, got shape {paths.shape}")
        if not np.all((paths > 0.0) & (paths <= 1.0)):
            raise ValidationError("survival probabilities must lie in (0, 1]")
        object.__setattr__(self, "paths", paths)

    @property
    def horizon(self) -> int:
        return self.paths.shape[1]

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def multi_year(self) -> np.ndarray:
        """Per-path t-year survivals, shape (K, T), column t-1 holds t-year survival."""
        return np.cumprod(self.paths, axis=1)

    def truncate(self, horizon: int) -> "MortalityScenarioSet":
        if horizon > self.horizon:
            raise HorizonError(f"scenario horizon {self.horizon} < requested {horizon}")
        return MortalityScenarioSet(self.initial_age, self.paths[:, :horizon], self.seed, self.provenance)

    def subset(self, n_paths: int) -> "MortalityScenarioSet":
        return MortalityScenarioSet(self.initial_age, self.paths[:n_paths], self.seed, self.provenance)

    def concat(self, other: "MortalityScenarioSet") -> "MortalityScenarioSet":
        if (other.initial_age, other.horizon) != (self.initial_age, self.horizon):
            raise ValidationError("cannot concatenate sets with different age or horizon")
        return MortalityScenarioSet(
            self.initial_age, np.vstack([self.paths, other.paths]), self.seed, "concatenated"
        )


@dataclass(frozen=True)
class SurvivalCurve:
    """Point-estimate survival curve averaged over scenario paths.

    ``multi_year[t - 1]`` is the t-year survival from the initial age and
    ``one_year[t]`` is the one-year survival at age ``initial_age + t``.
    """

    initial_age: int
    multi_year: np.ndarray
    one_year: np.ndarray

    def __post_init__(self):
        multi = np.asarray(self.multi_year, dtype=float)
        one = np.asarray(self.one_year, dtype=float)
        if multi.shape != one.shape or multi.ndim != 1 or multi.size == 0:
            raise ValidationError("multi_year and one_year must be equal-length non-empty vectors")
        if not (np.all((one > 0) & (one <= 1)) and np.all((multi > 0) & (multi <= 1))):
            raise ValidationError("survival probabilities must lie in (0, 1]")
        object.__setattr__(self, "multi_year", multi)
        object.__setattr__(self, "one_year", one)

    @property
    def horizon(self) -> int:
        return self.multi_year.size

    def life_expectancy(self) -> float:
        """Curtate expectancy truncated at the horizon."""
        return float(self.multi_year.sum())


# =============================================================================
# Parameter files
# =============================================================================

def _per_age(value, age_range: tuple[int, int], name: str) -> np.ndarray:
    lo, hi = age_range
    if isinstance(value, Mapping):
        try:
            return np.array([float(value[str(a)] if str(a) in value else value[a]) for a in range(lo, hi + 1)])
        except KeyError as exc:
            raise ValidationError(f"{name} is missing age {exc.args[0]}") from None
    return np.asarray(value, dtype=float)


def parameters_from_dict(data: Mapping) -> ApciParameters:
    try:
        age_range = (int(data["age_range"][0]), int(data["age_range"][1]))
        fitted = data.get("fitted_years")
        return ApciParameters(
            age_range=age_range,
            beta1=_per_age(data["beta1"], age_range, "beta1"),
            beta2=_per_age(data["beta2"], age_range, "beta2"),
            kappa_last=float(data["kappa_last"]),
            sigma_kappa=float(data["sigma_kappa"]),
            theta={int(k): float(v) for k, v in data.get("theta", {}).items()},
            sigma_omega=_per_age(data["sigma_omega"], age_range, "sigma_omega"),
            h_bar=float(data["h_bar"]),
            base_year=int(data["base_year"]),
            fitted_years=tuple(int(y) for y in fitted) if fitted is not None else None,
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed parameter file: {exc}") from None


def parameters_to_dict(params: ApciParameters) -> dict:
    out = {
        "age_range": list(params.age_range),
        "beta1": params.beta1.tolist(),
        "beta2": params.beta2.tolist(),
        "kappa_last": params.kappa_last,
        "sigma_kappa": params.sigma_kappa,
        "theta": {str(k): v for k, v in sorted(params.theta.items())},
        "sigma_omega": params.sigma_omega.tolist(),
        "h_bar": params.h_bar,
        "base_year": params.base_year,
    }
    if params.fitted_years is not None:
        out["fitted_years"] = list(params.fitted_years)
    return out


def load_parameters(path: PathLike) -> ApciParameters:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorruptFileError(f"cannot read parameter file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFileError(f"parameter file {path} is not valid JSON: {exc}") from exc
    return parameters_from_dict(data)


def save_parameters(params: ApciParameters, path: PathLike) -> None:
    Path(path).write_text(json.dumps(parameters_to_dict(params), indent=2) + "\n", encoding="utf-8")


# =============================================================================
# Simulation
# =============================================================================

def path_generator(seed: int, k: int) -> np.random.Generator:
    """Independent Philox stream for path ``k``; depends only on ``(seed, k)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(k),))))


def simulate_scenarios(params: ApciParameters, x: int, T: int, K: int, seed: int) -> MortalityScenarioSet:
    """Simulate K paths of one-year survival for a cohort aged ``x``.

    Time ``t`` (0-based) is calendar year ``base_year + 1 + t``. The random
    walk takes its first step into that year, so with ``sigma_kappa = 0`` every
    projected year uses ``kappa_last``.

    Args:
        params: Fitted APCI parameters.
        x: Age of the cohort at time 0.
        T: Number of projected years.
        K: Number of paths.
        seed: Reproducibility seed (up to 64 bits).

    Returns:
        A scenario set with ``paths`` of shape (K, T).
    """
    if K < 1:
        raise ValidationError(f"path count must be >= 1, got {K}")
    if T < 1:
        raise ValidationError(f"horizon must be >= 1, got {T}")
    lo, hi = params.age_range
    if x < lo or x + T > hi + 1:
        raise HorizonError(f"ages {x}..{x + T - 1} fall outside the fitted range {lo}..{hi}")
    if not 0 <= seed < 2**64:
        raise ValidationError("seed must fit in an unsigned 64-bit integer")

    idx = np.arange(T) + params.age_index(x)
    years = params.base_year + 1 + np.arange(T)
    cohort = params.base_year + 1 - x
    level = params.beta1[idx] + params.beta2[idx] * (years - params.h_bar) + params.cohort_effect(cohort)
    sig_omega = params.sigma_omega[idx]

    eps = np.empty((K, T))
    omega = np.empty((K, T))
    for k in range(K):
        rng = path_generator(seed, k)
        eps[k] = rng.standard_normal(T)
        omega[k] = rng.standard_normal(T)

    kappa = params.kappa_last + params.sigma_kappa * np.cumsum(eps, axis=1)
    m = np.exp(level + kappa + sig_omega * omega)
    q = np.exp(-m)
    # exp(-m) underflows to 0 only for absurd hazards; keep the (0, 1] invariant.
    q = np.maximum(q, np.finfo(float).tiny)
    return MortalityScenarioSet(initial_age=x, paths=q, seed=int(seed))


def estimate_curve(scenarios: MortalityScenarioSet) -> SurvivalCurve:
    """Average multi-year and one-year survivals across paths."""
    return SurvivalCurve(
        initial_age=scenarios.initial_age,
        multi_year=scenarios.multi_year().mean(axis=0),
        one_year=scenarios.paths.mean(axis=0),
    )


def deterministic_curve(initial_age: int, one_year: Sequence[float]) -> SurvivalCurve:
    one = np.asarray(one_year, dtype=float)
    return SurvivalCurve(initial_age, np.cumprod(one), one)


# =============================================================================
# Binary scenario files
# =============================================================================

def save_scenarios(scenarios: MortalityScenarioSet, path: PathLike) -> None:
    """Write the little-endian LSWP layout: header then K*T float64 by path."""
    K, T = scenarios.paths.shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, scenarios.initial_age, T, K, int(scenarios.seed))
    body = np.ascontiguousarray(scenarios.paths, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load_scenarios(path: PathLike) -> MortalityScenarioSet:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CorruptFileError(f"cannot read scenario file {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise CorruptFileError(f"{path}: truncated header")
    magic, version, x, T, K, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptFileError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * K * T
    if len(raw) != expected:
        raise CorruptFileError(f"{path}: expected {expected} bytes for K={K}, T={T}, found {len(raw)}")
    paths = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(K, T).astype(np.float64)
    try:
        return MortalityScenarioSet(initial_age=x, paths=paths, seed=seed, provenance="loaded-fixture")
    except ValidationError as exc:
        raise CorruptFileError(f"{path}: {exc}") from exc


# =============================================================================
# Bundled fixture
# =============================================================================

def fixture_path(name: str) -> Path:
    return Path(str(resources.files("longswap") / "data" / name))


def load_fixture_parameters() -> ApciParameters:
    """Synthetic APCI parameters shipped with the package (ages 20..100)."""
    return load_parameters(fixture_path("fixture_params.json"))


def load_fixture_scenarios() -> MortalityScenarioSet:
    """K=2000 paths for a 65-year-old cohort over 35 years, seed ``FIXTURE_SEED``."""
    return load_scenarios(fixture_path("fixture_scenarios.lswp"))
