"""
Buyer best response and mean-variance values for the static swap.

With a constant hedge ratio ``u`` the buyer's terminal surplus is affine in ``u``:
its mean drops by ``u * C1`` and its variance is ``(1 - u)**2 * D1`` where

    C1 = sum_i (1+r)^(T-i) * ((1+eta) * lhat_i - E[l_i])
    D1 = sum_ij (1+r)^(2T-i-j) * Cov(l_i, l_j)

so the optimum is ``clamp(1 - C1 / (gamma_b * D1), 0, 1)``. Fixed payments
``lhat`` always come from the benchmark curve; the moments carry the prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import CohortMoments, PriorMeasure
from .contract import ContractSpec, static_fixed_payments
from .errors import ValidationError
from .mortality import SurvivalCurve


@dataclass(frozen=True)
class StaticSolution:
    u_star: float
    C1: float
    D1: float
    prior: PriorMeasure
    eta: float
    buyer_value: float | None = None
    seller_value: float | None = None


@dataclass(frozen=True)
class StaticTerms:
    """Pieces of ``C1`` and ``D1`` that do not depend on ``eta``.

    ``C1(eta) = (1 + eta) * fixed_pv - mean_pv``.
    """

    fixed_pv: float
    mean_pv: float
    D1: float
    growth: float

    def C1(self, eta):
        return (1.0 + np.asarray(eta, dtype=float)) * self.fixed_pv - self.mean_pv


def static_terms(contract: ContractSpec, moments: CohortMoments, curve: SurvivalCurve) -> StaticTerms:
    acc = contract.accumulation()
    lhat = static_fixed_payments(contract, curve)
    T = contract.horizon
    if moments.mean.size != T:
        raise ValidationError(f"moments cover {moments.mean.size} years, contract has {T}")
    return StaticTerms(
        fixed_pv=float(acc @ lhat),
        mean_pv=float(acc @ moments.mean),
        D1=float(acc @ moments.cov @ acc),
        growth=(1.0 + contract.rate) ** T,
    )


def optimal_hedge(C1, D1: float, gamma_b: float):
    """Clamped first-order condition, vectorised over ``C1``.

    A deterministic liability (``D1 == 0``) makes the objective linear in ``u``;
    the buyer then hedges fully iff the trade is actuarially favourable.
    """
    C1 = np.asarray(C1, dtype=float)
    if D1 <= 0.0:
        u = np.where(C1 < 0.0, 1.0, 0.0)
    else:
        u = np.clip(1.0 - C1 / (gamma_b * D1), 0.0, 1.0)
    return float(u) if u.ndim == 0 else u


def static_best_response(contract: ContractSpec, moments: CohortMoments, curve: SurvivalCurve,
                         gamma_b: float, prior: PriorMeasure | None = None) -> StaticSolution:
    if not gamma_b > 0:
        raise ValidationError(f"buyer risk aversion must be positive, got {gamma_b}")
    prior = prior if prior is not None else moments.measure
    terms = static_terms(contract, moments, curve)
    C1 = float(terms.C1(contract.eta))
    return StaticSolution(
        u_star=optimal_hedge(C1, terms.D1, gamma_b), C1=C1, D1=terms.D1, prior=prior, eta=contract.eta
    )


def static_values(contract: ContractSpec, solution: StaticSolution, moments: CohortMoments,
                  curve: SurvivalCurve, gamma_b: float, gamma_s: float, u: float | None = None
                  ) -> tuple[float, float]:
    """Buyer and seller mean-variance values at hedge ratio ``u`` (default ``u_star``)."""
    u = solution.u_star if u is None else u
    if not 0.0 <= u <= 1.0:
        raise ValidationError(f"hedge ratio {u} outside [0, 1]")
    terms = static_terms(contract, moments, curve)
    buyer = (contract.buyer_initial * terms.growth - terms.mean_pv - u * solution.C1
             - 0.5 * gamma_b * (1.0 - u) ** 2 * solution.D1)
    seller = contract.seller_initial * terms.growth + u * solution.C1 - 0.5 * gamma_s * u**2 * solution.D1
    return float(buyer), float(seller)


def static_welfare_gains(contract: ContractSpec, moments: CohortMoments, curve: SurvivalCurve,
                         gamma_b: float, gamma_s: float, prior: PriorMeasure | None = None
                         ) -> tuple[float, float]:
    """Gains at ``u*(eta)`` over the no-trade baseline ``u = 0``."""
    sol = static_best_response(contract, moments, curve, gamma_b, prior)
    u = sol.u_star
    buyer_gain = -u * sol.C1 + 0.5 * gamma_b * (1.0 - (1.0 - u) ** 2) * sol.D1
    seller_gain = u * sol.C1 - 0.5 * gamma_s * u**2 * sol.D1
    return float(buyer_gain), float(seller_gain)
