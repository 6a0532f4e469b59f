"""
Time-consistent equilibrium for the dynamic swap.

One-year survivals are point estimates, so conditional on ``l_t`` the next count
is binomial and both the equilibrium value ``V_t = A_t b + F_t l_t`` and the
conditional mean ``g_t = a_t b + f_t l_t`` stay linear in the state. The
equilibrium hedge ratio is therefore deterministic in ``t`` and follows from a
single backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .cohort import BENCHMARK, MomentMode, PriorMeasure, chain_moments, point_estimate_set, sample_cohort_paths
from .contract import ContractSpec, dynamic_fixed_payments, terminal_surpluses
from .errors import ValidationError
from .mortality import MortalityScenarioSet, SurvivalCurve

MIN_CHAINS = 100


@dataclass(frozen=True)
class DynamicSolution:
    u_path: np.ndarray
    F: np.ndarray
    f: np.ndarray
    A: np.ndarray
    buyer_value: float
    prior: PriorMeasure
    eta: float

    @property
    def a(self) -> np.ndarray:
        return self.A


def backward_pass(p, p_lam, eta, rate: float, gamma_b: float, u_fixed=None):
    """Equilibrium (or fixed-strategy) recursion, broadcast over leading axes.

    Args:
        p: Benchmark one-year survivals, shape (..., T).
        p_lam: Prior one-year survivals, shape (..., T).
        eta: Risk loading, scalar or broadcastable to ``p[..., 0]``.
        rate: Risk-free rate.
        gamma_b: Buyer risk aversion.
        u_fixed: If given, evaluate this strategy instead of optimising.

    Returns:
        ``(u, F, f)`` with ``u`` of shape (..., T) and ``F``, ``f`` of shape
        (..., T + 1) holding the terminal zeros.
    """
    p = np.asarray(p, dtype=float)
    p_lam = np.asarray(p_lam, dtype=float)
    shape = np.broadcast_shapes(p.shape, p_lam.shape, np.shape(eta) + (1,))
    T = shape[-1]
    loading = 1.0 + np.asarray(eta, dtype=float)
    u = np.empty(shape)
    F = np.zeros(shape[:-1] + (T + 1,))
    f = np.zeros(shape[:-1] + (T + 1,))
    if u_fixed is not None:
        u_fixed = np.broadcast_to(np.asarray(u_fixed, dtype=float), shape)
    for t in range(T - 1, -1, -1):
        acc = (1.0 + rate) ** (T - t - 1)
        pl = p_lam[..., t]
        slope = loading * p[..., t] - pl
        var = (1.0 - pl) * pl
        f_next = f[..., t + 1]
        if u_fixed is None:
            with np.errstate(divide="ignore", invalid="ignore"):
                interior = 1.0 - slope / (gamma_b * acc * var) - f_next / acc
            # degenerate period: objective is linear in u
            ut = np.where(var > 0.0, np.clip(interior, 0.0, 1.0), np.where(slope > 0.0, 0.0, 1.0))
        else:
            ut = u_fixed[..., t]
        mean_step = acc * (pl + ut * slope)
        u[..., t] = ut
        f[..., t] = pl * f_next - mean_step
        F[..., t] = pl * F[..., t + 1] - mean_step - 0.5 * gamma_b * ((ut - 1.0) * acc + f_next) ** 2 * var
    return u, F, f


def _one_year(contract: ContractSpec, curve: SurvivalCurve, prior: PriorMeasure):
    T = contract.horizon
    if curve.horizon < T:
        raise ValidationError(f"curve horizon {curve.horizon} < contract horizon {T}")
    p = curve.one_year[:T]
    return p, p**prior.lam


def _solution(contract, u, F, f, prior) -> DynamicSolution:
    T = contract.horizon
    A = (1.0 + contract.rate) ** (T - np.arange(T + 1))
    value = A[0] * contract.buyer_initial + F[0] * contract.cohort.initial_count
    return DynamicSolution(u_path=u, F=F, f=f, A=A, buyer_value=float(value), prior=prior, eta=contract.eta)


def dynamic_equilibrium(contract: ContractSpec, curve: SurvivalCurve, gamma_b: float,
                        prior: PriorMeasure = BENCHMARK) -> DynamicSolution:
    """Solve for the subgame-perfect hedge-ratio path and value coefficients."""
    if not gamma_b > 0:
        raise ValidationError(f"buyer risk aversion must be positive, got {gamma_b}")
    p, pl = _one_year(contract, curve, prior)
    u, F, f = backward_pass(p, pl, contract.eta, contract.rate, gamma_b)
    return _solution(contract, u, F, f, prior)


def strategy_value(contract: ContractSpec, curve: SurvivalCurve, u_path, gamma_b: float,
                   prior: PriorMeasure = BENCHMARK) -> DynamicSolution:
    """Run the value recursion for a fixed, non-optimised strategy."""
    u_path = np.asarray(u_path, dtype=float)
    if u_path.shape != (contract.horizon,) or np.any((u_path < 0) | (u_path > 1)):
        raise ValidationError("strategy must be a length-T vector in [0, 1]")
    p, pl = _one_year(contract, curve, prior)
    u, F, f = backward_pass(p, pl, contract.eta, contract.rate, gamma_b, u_fixed=u_path)
    return _solution(contract, u, F, f, prior)


def dynamic_buyer_value(solution: DynamicSolution, contract: ContractSpec) -> float:
    return float(solution.A[0] * contract.buyer_initial + solution.F[0] * contract.cohort.initial_count)


# =============================================================================
# Terminal surpluses as linear functionals of the survivor chain
# =============================================================================

def hedge_weights(contract: ContractSpec, curve: SurvivalCurve, u_path) -> np.ndarray:
    """Weights ``w`` with ``sum_t w_t l_t`` (t = 0..T) equal to the buyer's swap cash at ``T``.

    The seller receives the negative of this; the buyer additionally pays the
    annuities ``sum_t (1+r)^(T-t) l_t``. Broadcasts over leading axes of ``u_path``.
    """
    u = np.asarray(u_path, dtype=float)
    T = contract.horizon
    acc = contract.accumulation()
    fixed_rate = (1.0 + np.asarray(contract.eta)) * curve.one_year[:T]
    w = np.zeros(u.shape[:-1] + (T + 1,))
    w[..., 1:] += u * acc
    w[..., :-1] -= u * acc * fixed_rate
    return w


def _chain_paths(contract: ContractSpec, curve: SurvivalCurve, scenarios: MortalityScenarioSet | None,
                 mode: MomentMode) -> np.ndarray:
    T = contract.horizon
    if mode == "point-estimate":
        return point_estimate_set(curve, "one_year").paths[:, :T]
    if mode == "mixture":
        if scenarios is None:
            raise ValidationError("mixture mode needs a scenario set")
        return scenarios.truncate(T).paths
    raise ValidationError(f"unknown moment mode {mode!r}")


def surplus_moments(contract: ContractSpec, curve: SurvivalCurve, u_path, prior: PriorMeasure = BENCHMARK,
                    scenarios: MortalityScenarioSet | None = None, mode: MomentMode = "point-estimate"
                    ) -> dict[str, float]:
    """Exact mean and variance of both terminal surpluses for a given strategy."""
    paths = _chain_paths(contract, curve, scenarios, mode) ** prior.lam
    mean, cov = chain_moments(contract.cohort.initial_count, paths)
    w = hedge_weights(contract, curve, u_path)
    annuity = np.concatenate([[0.0], contract.accumulation()])
    wb = w - annuity
    growth = (1.0 + contract.rate) ** contract.horizon
    return {
        "buyer_mean": float(contract.buyer_initial * growth + wb @ mean),
        "buyer_var": float(wb @ cov @ wb),
        "seller_mean": float(contract.seller_initial * growth - w @ mean),
        "seller_var": float(w @ cov @ w),
    }


def simulated_surplus_moments(contract: ContractSpec, curve: SurvivalCurve, u_path, prior: PriorMeasure,
                              N: int, seed: int, scenarios: MortalityScenarioSet | None = None,
                              mode: MomentMode = "point-estimate") -> dict[str, float]:
    """Monte Carlo counterpart of :func:`surplus_moments` over N sampled chains."""
    if N < MIN_CHAINS:
        raise ValidationError(f"need at least {MIN_CHAINS} chains, got {N}")
    chain_set = MortalityScenarioSet(contract.cohort.initial_age, _chain_paths(contract, curve, scenarios, mode))
    lives = sample_cohort_paths(contract.cohort, chain_set, prior, N, seed)
    fixed = dynamic_fixed_payments(contract, curve, lives)
    sample = terminal_surpluses(contract, u_path, lives, fixed)
    return {
        "buyer_mean": float(np.mean(sample.buyer_terminal)),
        "buyer_var": float(np.var(sample.buyer_terminal)),
        "seller_mean": float(np.mean(sample.seller_terminal)),
        "seller_var": float(np.var(sample.seller_terminal)),
    }


def dynamic_seller_value(solution: DynamicSolution, contract: ContractSpec, curve: SurvivalCurve,
                         scenarios: MortalityScenarioSet | None, prior: PriorMeasure, gamma_s: float,
                         N: int = 100_000, seed: int = 0,
                         method: Literal["monte_carlo", "analytic"] = "monte_carlo",
                         mode: MomentMode = "point-estimate") -> float:
    """Seller's mean-variance value of ``S_T`` under the equilibrium strategy."""
    if method == "monte_carlo":
        mom = simulated_surplus_moments(contract, curve, solution.u_path, prior, N, seed, scenarios, mode)
    elif method == "analytic":
        mom = surplus_moments(contract, curve, solution.u_path, prior, scenarios, mode)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return mom["seller_mean"] - 0.5 * gamma_s * mom["seller_var"]


def dynamic_welfare_gains(contract: ContractSpec, curve: SurvivalCurve, gamma_b: float, gamma_s: float,
                          prior: PriorMeasure = BENCHMARK, scenarios: MortalityScenarioSet | None = None,
                          mode: MomentMode = "point-estimate") -> tuple[float, float]:
    """Buyer and seller gains at the equilibrium strategy over no trade.

    In point-estimate mode the buyer's gain compares recursion values, whose
    ``u = 0`` member equals the plain unhedged mean-variance value. In mixture
    mode both buyer values are mean-variance values of ``B_T`` under the full
    scenario mixture.
    """
    sol = dynamic_equilibrium(contract, curve, gamma_b, prior)
    zero = np.zeros(contract.horizon)
    if mode == "point-estimate":
        base = strategy_value(contract, curve, zero, gamma_b, prior).buyer_value
        buyer_gain = sol.buyer_value - base
    else:
        hedged = surplus_moments(contract, curve, sol.u_path, prior, scenarios, mode)
        bare = surplus_moments(contract, curve, zero, prior, scenarios, mode)
        buyer_gain = (hedged["buyer_mean"] - 0.5 * gamma_b * hedged["buyer_var"]
                      - bare["buyer_mean"] + 0.5 * gamma_b * bare["buyer_var"])
    mom = surplus_moments(contract, curve, sol.u_path, prior, scenarios, mode)
    growth = (1.0 + contract.rate) ** contract.horizon
    seller_gain = mom["seller_mean"] - contract.seller_initial * growth - 0.5 * gamma_s * mom["seller_var"]
    return float(buyer_gain), float(seller_gain)
