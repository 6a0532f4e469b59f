"""
Seller's outer problem: choose the risk loading anticipating the buyer's hedge.

The seller evaluates every loading ``eta`` against every prior ``Q^lambda`` in
the ambiguity set and keeps the worst case. Each cell of the ``(eta, lambda)``
grid is closed form (static) or one O(T) backward pass (dynamic), so the whole
grid is evaluated in vectorised chunks. Chunk boundaries are fixed, which keeps
results bit-identical however many worker threads run them.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from scipy.optimize import bisect

from .cohort import CohortSpec, MomentMode, PriorMeasure, chain_moments, cohort_covariance, point_estimate_set
from .contract import ContractKind, ContractSpec
from .dynamic import backward_pass
from .errors import BoundError, ValidationError
from .mortality import MortalityScenarioSet, SurvivalCurve
from .static import optimal_hedge, static_terms

LAMBDA_MAX = 100.0
LAMBDA_MIN = 1e-9
GRID_POINTS = 101
ETA_CHUNK = 16

ResponseMode = Literal["prior", "benchmark"]


# =============================================================================
# Ambiguity sets
# =============================================================================

def life_expectancy(curve: SurvivalCurve, lam: float = 1.0) -> float:
    """Truncated expectancy ``sum_k (kp_x)**lam`` under the tilted prior."""
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    return float(np.sum(curve.multi_year**lam))


@dataclass(frozen=True)
class AmbiguitySet:
    alpha: float
    lambda_lo: float
    lambda_hi: float
    grid: np.ndarray
    reference_expectancy: float

    def __post_init__(self):
        if not self.lambda_lo <= 1.0 <= self.lambda_hi:
            raise ValidationError("ambiguity interval must contain 1")
        object.__setattr__(self, "grid", np.unique(np.asarray(self.grid, dtype=float)))

    def union(self, other: "AmbiguitySet") -> "AmbiguitySet":
        """Merge grids, e.g. to compare nested sets on shared points."""
        alpha, lo, hi = max(self.alpha, other.alpha), min(self.lambda_lo, other.lambda_lo), max(
            self.lambda_hi, other.lambda_hi)
        return AmbiguitySet(alpha, lo, hi, np.concatenate([self.grid, other.grid]), self.reference_expectancy)


def lambda_interval(curve: SurvivalCurve, alpha: float, n_grid: int = GRID_POINTS, tol: float = 1e-8
                    ) -> AmbiguitySet:
    """Priors whose expectancy lies within ``(1 +/- alpha)`` of the benchmark's.

    Endpoints are found by bisection on the strictly decreasing map
    ``lambda -> e_x(lambda)``. The grid spans the interval with ``n_grid``
    points and always contains the benchmark ``lambda = 1``.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"ambiguity degree must lie in [0, 1), got {alpha}")
    e_ref = life_expectancy(curve)
    if alpha == 0.0:
        return AmbiguitySet(0.0, 1.0, 1.0, np.array([1.0]), e_ref)

    def gap(target):
        return lambda lam: life_expectancy(curve, lam) - target

    low_target, high_target = (1.0 - alpha) * e_ref, (1.0 + alpha) * e_ref
    if life_expectancy(curve, LAMBDA_MAX) > low_target:
        raise BoundError(f"expectancy {low_target:.4f} not reachable for lambda <= {LAMBDA_MAX}")
    if life_expectancy(curve, LAMBDA_MIN) < high_target:
        raise BoundError(f"expectancy {high_target:.4f} exceeds what any lambda > 0 can reach")
    hi = bisect(gap(low_target), 1.0, LAMBDA_MAX, xtol=tol, rtol=4 * np.finfo(float).eps)
    lo = bisect(gap(high_target), LAMBDA_MIN, 1.0, xtol=tol, rtol=4 * np.finfo(float).eps)
    grid = np.append(np.linspace(lo, hi, n_grid), 1.0)
    return AmbiguitySet(alpha, lo, hi, grid, e_ref)


def no_ambiguity(curve: SurvivalCurve) -> AmbiguitySet:
    return lambda_interval(curve, 0.0)


# =============================================================================
# Market and grid evaluation
# =============================================================================

@dataclass(frozen=True)
class Market:
    """Everything the seller needs to price one contract type.

    ``moment_mode`` selects the survivor-count law used for static moments and for
    evaluating dynamic surpluses; the dynamic buyer always solves with point
    estimates. ``response="benchmark"`` makes the buyer best-respond under the
    benchmark prior whatever prior the seller is testing.
    """

    curve: SurvivalCurve
    cohort: CohortSpec
    rate: float
    gamma_b: float
    gamma_s: float
    scenarios: MortalityScenarioSet | None = None
    buyer_initial: float = 0.0
    seller_initial: float = 0.0
    moment_mode: MomentMode = "point-estimate"
    response: ResponseMode = "prior"
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.gamma_b > 0:
            raise ValidationError(f"buyer risk aversion must be positive, got {self.gamma_b}")
        if not self.gamma_s >= 0:
            raise ValidationError(f"seller risk aversion must be >= 0, got {self.gamma_s}")
        if self.moment_mode == "mixture" and self.scenarios is None:
            raise ValidationError("mixture mode needs a scenario set")
        if self.response not in ("prior", "benchmark"):
            raise ValidationError(f"unknown response mode {self.response!r}")

    def contract(self, kind: ContractKind, eta: float = 0.0) -> ContractSpec:
        return ContractSpec(kind, eta, self.rate, self.cohort, self.buyer_initial, self.seller_initial)

    @property
    def growth(self) -> float:
        return (1.0 + self.rate) ** self.cohort.horizon

    @property
    def seller_baseline(self) -> float:
        return self.seller_initial * self.growth

    def _static_terms(self, lam: float):
        key = ("static", lam)
        if key not in self._cache:
            scen = self.scenarios
            if scen is None:
                scen = point_estimate_set(self.curve)
            moments = cohort_covariance(self.cohort, scen, PriorMeasure(lam), self.moment_mode)
            self._cache[key] = static_terms(self.contract("static"), moments, self.curve)
        return self._cache[key]

    def _dynamic_chain(self, lam: float):
        key = ("dynamic", lam)
        if key not in self._cache:
            T = self.cohort.horizon
            if self.moment_mode == "point-estimate":
                paths = self.curve.one_year[None, :T]
            else:
                paths = self.scenarios.truncate(T).paths
            self._cache[key] = chain_moments(self.cohort.initial_count, paths**lam)
        return self._cache[key]


@dataclass(frozen=True)
class GridResult:
    """Arrays of shape (n_eta, n_lambda)."""

    eta: np.ndarray
    lam: np.ndarray
    seller_gain: np.ndarray
    buyer_gain: np.ndarray
    u_summary: np.ndarray


def _static_chunk(market: Market, etas: np.ndarray, lams: np.ndarray):
    terms = [market._static_terms(float(l)) for l in lams]
    C1 = np.stack([t.C1(etas) for t in terms], axis=1)
    D1 = np.array([t.D1 for t in terms])
    if market.response == "benchmark":
        bench = market._static_terms(1.0)
        u = np.repeat(optimal_hedge(bench.C1(etas), bench.D1, market.gamma_b)[:, None], lams.size, axis=1)
    else:
        u = np.stack([optimal_hedge(C1[:, j], D1[j], market.gamma_b) for j in range(lams.size)], axis=1)
    seller = u * C1 - 0.5 * market.gamma_s * u**2 * D1
    buyer = -u * C1 + 0.5 * market.gamma_b * (1.0 - (1.0 - u) ** 2) * D1
    return seller, buyer, u


def _dynamic_chunk(market: Market, etas: np.ndarray, lams: np.ndarray):
    T = market.cohort.horizon
    l0 = market.cohort.initial_count
    p = market.curve.one_year[:T]
    p_lam = p[None, :] ** lams[:, None]
    eta_col = etas[:, None]
    if market.response == "benchmark":
        u1, _, _ = backward_pass(p, p, etas, market.rate, market.gamma_b)
        u = np.broadcast_to(u1[:, None, :], (etas.size, lams.size, T))
        _, F, _ = backward_pass(p, p_lam, eta_col, market.rate, market.gamma_b, u_fixed=u)
    else:
        u, F, _ = backward_pass(p, p_lam, eta_col, market.rate, market.gamma_b)

    acc = (1.0 + market.rate) ** (T - np.arange(1, T + 1))
    fixed_rate = (1.0 + eta_col[..., None]) * p
    w = np.zeros(u.shape[:-1] + (T + 1,))
    w[..., 1:] += u * acc
    w[..., :-1] -= u * acc * fixed_rate
    means = np.stack([market._dynamic_chain(float(l))[0] for l in lams])
    covs = np.stack([market._dynamic_chain(float(l))[1] for l in lams])
    seller_mean = -np.einsum("elt,lt->el", w, means)
    seller_var = np.einsum("elt,lts,els->el", w, covs, w)
    seller = seller_mean - 0.5 * market.gamma_s * seller_var

    if market.moment_mode == "point-estimate":
        _, F0, _ = backward_pass(p, p_lam, 0.0, market.rate, market.gamma_b, u_fixed=np.zeros(T))
        buyer = l0 * (F[..., 0] - F0[None, :, 0])
    else:
        annuity = np.concatenate([[0.0], acc])
        wb = w - annuity
        mean_b = np.einsum("elt,lt->el", wb, means)
        var_b = np.einsum("elt,lts,els->el", wb, covs, wb)
        mean_0 = -means @ annuity
        var_0 = np.einsum("t,lts,s->l", annuity, covs, annuity)
        buyer = (mean_b - 0.5 * market.gamma_b * var_b) - (mean_0 - 0.5 * market.gamma_b * var_0)
    return seller, buyer, u.mean(axis=-1)


def evaluate_grid(market: Market, kind: ContractKind, etas, lams, threads: int | None = None) -> GridResult:
    """Seller gain, buyer gain and hedge summary on every ``(eta, lambda)`` pair.

    Buyer gains are measured under the same prior as the seller's. The hedge
    summary is ``u*`` for static contracts and the mean of the ``u*`` path for
    dynamic ones.
    """
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(etas < 0):
        raise ValidationError("risk loadings must be non-negative")
    if np.any(lams <= 0):
        raise ValidationError("lambda values must be positive")
    if kind == "static":
        chunk_fn = _static_chunk
    elif kind == "dynamic":
        chunk_fn = _dynamic_chunk
    else:
        raise ValidationError(f"unknown contract kind {kind!r}")
    # warm the per-lambda cache serially so workers only read it
    for l in np.append(lams, 1.0):
        market._static_terms(float(l)) if kind == "static" else market._dynamic_chain(float(l))

    chunks = [etas[i:i + ETA_CHUNK] for i in range(0, etas.size, ETA_CHUNK)]
    work = lambda c: chunk_fn(market, c, lams)  # noqa: E731
    if threads is not None and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    seller, buyer, u = (np.concatenate([p[i] for p in parts], axis=0) for i in range(3))
    return GridResult(etas, lams, seller, buyer, u)


# =============================================================================
# Seller objectives
# =============================================================================

def seller_objective(market: Market, kind: ContractKind, eta: float, lam: float) -> float:
    """Seller's mean-variance value under ``Q^lambda`` given the buyer's response."""
    res = evaluate_grid(market, kind, [eta], [lam])
    return market.seller_baseline + float(res.seller_gain[0, 0])


def worst_case_objective(market: Market, kind: ContractKind, eta: float, ambiguity: AmbiguitySet
                         ) -> tuple[float, float]:
    """Minimum seller value over the ambiguity grid and the minimising lambda."""
    res = evaluate_grid(market, kind, [eta], ambiguity.grid)
    j = int(np.argmin(res.seller_gain[0]))
    return market.seller_baseline + float(res.seller_gain[0, j]), float(ambiguity.grid[j])


@dataclass(frozen=True)
class Sweep:
    contract_kind: str
    eta: np.ndarray
    lambda_worst: np.ndarray
    seller_gain: np.ndarray
    buyer_gain: np.ndarray
    u_summary: np.ndarray

    def positive_range(self) -> tuple[float, float] | None:
        pos = self.eta[self.seller_gain > 0]
        return (float(pos.min()), float(pos.max())) if pos.size else None

    def write_csv(self, path: str | Path, mode: str = "w", header: bool = True) -> None:
        with open(path, mode, newline="") as fh:
            writer = csv.writer(fh)
            if header:
                writer.writerow(["contract_kind", "eta", "lambda_worst", "seller_gain", "buyer_gain", "u_summary"])
            for row in zip(self.eta, self.lambda_worst, self.seller_gain, self.buyer_gain, self.u_summary):
                writer.writerow([self.contract_kind] + [repr(float(v)) for v in row])


@dataclass(frozen=True)
class EquilibriumSolution:
    contract_kind: str
    eta_star: float | None
    seller_gain_at_star: float
    buyer_gain_at_star: float
    worst_lambda_at_star: float
    u_summary_at_star: float
    alpha: float
    sweep: Sweep

    @property
    def no_trade(self) -> bool:
        return self.eta_star is None

    def summary(self) -> dict:
        return {
            "contract_kind": self.contract_kind,
            "alpha": self.alpha,
            "no_trade": self.no_trade,
            "eta_star": self.eta_star,
            "seller_gain": self.seller_gain_at_star,
            "buyer_gain": self.buyer_gain_at_star,
            "worst_lambda": self.worst_lambda_at_star,
            "u_summary": self.u_summary_at_star,
        }


def _reduce(market: Market, kind: ContractKind, etas, ambiguity: AmbiguitySet, threads=None):
    """Worst-case seller gain per eta plus the benchmark-prior buyer gain."""
    res = evaluate_grid(market, kind, etas, ambiguity.grid, threads)
    j = np.argmin(res.seller_gain, axis=1)
    rows = np.arange(res.eta.size)
    bench = int(np.flatnonzero(ambiguity.grid == 1.0)[0])
    return Sweep(
        contract_kind=kind,
        eta=res.eta,
        lambda_worst=ambiguity.grid[j],
        seller_gain=res.seller_gain[rows, j],
        buyer_gain=res.buyer_gain[:, bench],
        u_summary=res.u_summary[rows, j],
    )


def golden_section_max(fn, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Maximise a unimodal ``fn`` on ``[lo, hi]`` to bracket width ``tol``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def optimize_eta(market: Market, kind: ContractKind, ambiguity: AmbiguitySet, eta_max: float = 1.0,
                 step: float = 5e-3, tol: float = 1e-4, threads: int | None = None) -> EquilibriumSolution:
    """Coarse sweep over ``[0, eta_max]`` then golden-section refinement around the best point."""
    n = int(round(eta_max / step))
    etas = np.linspace(0.0, n * step, n + 1)
    sweep = _reduce(market, kind, etas, ambiguity, threads)
    i = int(np.argmax(sweep.seller_gain))
    best_eta, best_gain = float(etas[i]), float(sweep.seller_gain[i])

    def worst_gain(eta):
        return float(_reduce(market, kind, [eta], ambiguity).seller_gain[0])

    lo, hi = max(0.0, best_eta - step), min(float(etas[-1]), best_eta + step)
    if hi > lo:
        eta_ref, gain_ref = golden_section_max(worst_gain, lo, hi, tol)
        if gain_ref > best_gain:
            best_eta, best_gain = eta_ref, gain_ref

    if not best_gain > 0.0:
        return EquilibriumSolution(kind, None, 0.0, 0.0, 1.0, 0.0, ambiguity.alpha, sweep)
    at = _reduce(market, kind, [best_eta], ambiguity)
    return EquilibriumSolution(
        contract_kind=kind,
        eta_star=best_eta,
        seller_gain_at_star=best_gain,
        buyer_gain_at_star=float(at.buyer_gain[0]),
        worst_lambda_at_star=float(at.lambda_worst[0]),
        u_summary_at_star=float(at.u_summary[0]),
        alpha=ambiguity.alpha,
        sweep=sweep,
    )


def buyer_welfare_profile(market: Market, kind: ContractKind, eta_star: float, ambiguity: AmbiguitySet
                          ) -> np.ndarray:
    """Rows ``(lambda, buyer_gain)`` at a fixed loading, buyer gain measured under each prior."""
    res = evaluate_grid(market, kind, [eta_star], ambiguity.grid)
    return np.column_stack([ambiguity.grid, res.buyer_gain[0]])


def write_equilibrium_json(solutions: list[EquilibriumSolution], path: str | Path) -> None:
    Path(path).write_text(json.dumps([s.summary() for s in solutions], indent=2) + "\n")
