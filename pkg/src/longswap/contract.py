"""
Indemnity longevity swap cash flows.

Each year ``t`` the seller pays the floating leg ``u_{t-1} * l_t`` and receives
the fixed leg ``u_{t-1} * (1 + eta) * lhat_t``. One unit of currency is one annuity
payment. Static contracts fix ``lhat_t`` at inception from the multi-year curve;
dynamic contracts reset it yearly to ``p_hat[x+t-1] * l_{t-1}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

import numpy as np

from .cohort import CohortSpec
from .errors import ValidationError
from .mortality import SurvivalCurve

ContractKind = Literal["static", "dynamic"]
KINDS: tuple[ContractKind, ...] = ("static", "dynamic")


@dataclass(frozen=True)
class ContractSpec:
    kind: ContractKind
    eta: float
    rate: float
    cohort: CohortSpec
    buyer_initial: float = 0.0
    seller_initial: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"contract kind must be static or dynamic, got {self.kind!r}")
        if not self.eta >= 0:
            raise ValidationError(f"risk loading must be >= 0, got {self.eta}")
        if not self.rate > -1:
            raise ValidationError(f"rate must exceed -1, got {self.rate}")

    @property
    def horizon(self) -> int:
        return self.cohort.horizon

    def accumulation(self) -> np.ndarray:
        """``(1 + r)**(T - t)`` for payment years ``t = 1..T``."""
        T = self.horizon
        return (1.0 + self.rate) ** (T - np.arange(1, T + 1))

    def with_eta(self, eta: float) -> "ContractSpec":
        return replace(self, eta=eta)


@dataclass(frozen=True)
class SurplusSample:
    """Terminal surpluses; array fields carry a leading batch axis when batched."""

    buyer_terminal: np.ndarray | float
    seller_terminal: np.ndarray | float
    hedge_path: np.ndarray
    lives_path: np.ndarray


def _require(contract: ContractSpec, kind: ContractKind) -> None:
    if contract.kind != kind:
        raise ValidationError(f"operation needs a {kind} contract, got {contract.kind}")


def static_fixed_payments(contract: ContractSpec, curve: SurvivalCurve) -> np.ndarray:
    """Expected survivors ``l0 * tp_x`` for ``t = 1..T``, fixed at time 0."""
    _require(contract, "static")
    T = contract.horizon
    if curve.horizon < T:
        raise ValidationError(f"curve horizon {curve.horizon} < contract horizon {T}")
    return contract.cohort.initial_count * curve.multi_year[:T]


def dynamic_fixed_payment(contract: ContractSpec, curve: SurvivalCurve, t: int, l_prev) -> float:
    """One-year expected survivors ``p_hat[x+t-1] * l_{t-1}`` for payment year ``t``."""
    _require(contract, "dynamic")
    if not 1 <= t <= contract.horizon:
        raise ValidationError(f"payment year {t} outside 1..{contract.horizon}")
    return curve.one_year[t - 1] * l_prev


def dynamic_fixed_payments(contract: ContractSpec, curve: SurvivalCurve, lives: np.ndarray) -> np.ndarray:
    """Vectorised :func:`dynamic_fixed_payment` over every year of every chain."""
    _require(contract, "dynamic")
    lives = np.asarray(lives)
    T = contract.horizon
    prev = np.concatenate(
        [np.full(lives.shape[:-1] + (1,), contract.cohort.initial_count), lives[..., : T - 1]], axis=-1
    )
    return curve.one_year[:T] * prev


def fixed_payments(contract: ContractSpec, curve: SurvivalCurve, lives: np.ndarray) -> np.ndarray:
    lives = np.asarray(lives)
    if contract.kind == "static":
        return np.broadcast_to(static_fixed_payments(contract, curve), lives.shape)
    return dynamic_fixed_payments(contract, curve, lives)


def terminal_surpluses(contract: ContractSpec, strategy, lives, fixed) -> SurplusSample:
    """Roll both surplus processes forward to ``T``.

    Args:
        contract: Contract terms.
        strategy: Hedge ratios ``u_0..u_{T-1}``, shape (T,) or batched (..., T).
        lives: Survivor counts ``l_1..l_T``, shape (T,) or (N, T).
        fixed: Expected-survivor leg ``lhat_t`` matching ``lives``.

    Returns:
        The terminal buyer and seller surpluses.
    """
    T = contract.horizon
    u = np.asarray(strategy, dtype=float)
    lives = np.asarray(lives)
    fixed = np.asarray(fixed, dtype=float)
    if u.shape[-1] != T or lives.shape[-1] != T:
        raise ValidationError(f"strategy and lives must have {T} periods")
    if np.any((u < 0) | (u > 1)):
        raise ValidationError("hedge ratios must lie in [0, 1]")
    l0 = contract.cohort.initial_count
    chain = np.concatenate([np.full(lives.shape[:-1] + (1,), l0), lives], axis=-1)
    if np.any(np.diff(chain, axis=-1) > 0) or np.any(lives < 0):
        raise ValidationError("survivor chain must be non-negative and non-increasing")

    growth = 1.0 + contract.rate
    b = np.full(lives.shape[:-1], float(contract.buyer_initial))
    s = np.full(lives.shape[:-1], float(contract.seller_initial))
    loading = 1.0 + contract.eta
    for t in range(T):
        net = u[..., t] * (lives[..., t] - loading * fixed[..., t])
        b = b * growth - lives[..., t] + net
        s = s * growth - net
    if b.ndim == 0:
        b, s = float(b), float(s)
    return SurplusSample(buyer_terminal=b, seller_terminal=s, hedge_path=u, lives_path=lives)


def write_static_payments_csv(contract: ContractSpec, curve: SurvivalCurve, path: str | Path) -> None:
    lhat = static_fixed_payments(contract, curve)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "lhat", "fixed_payment"])
        for t, v in enumerate(lhat, start=1):
            writer.writerow([t, repr(float(v)), repr(float((1.0 + contract.eta) * v))])


def payment_fan(contract: ContractSpec, curve: SurvivalCurve, lives: np.ndarray) -> np.ndarray:
    """Rows ``(t, mean, q2.5, q97.5)`` of the full-hedge dynamic fixed payment across chains."""
    pay = (1.0 + contract.eta) * dynamic_fixed_payments(contract, curve, lives)
    t = np.arange(1, contract.horizon + 1)
    lo, hi = np.quantile(pay, [0.025, 0.975], axis=0)
    # summation rounding can push the mean of identical payments one ulp outside
    mean = np.clip(pay.mean(axis=0), lo, hi)
    return np.column_stack([t, mean, lo, hi])


def write_payment_fan_csv(fan: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "mean", "q2.5", "q97.5"])
        for row in fan:
            writer.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
