"""Allocation rules, payment rules and the mechanisms built from them.

Rules are vectorized over report profiles: they take ``values`` and a boolean
``present`` mask, both shaped ``(..., n)``, and return an array of the same
shape. Absent agents carry ``0.0`` in ``values``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (EMPTY, Outcome, QualityFunction, ReportProfile, TypeProfile,
                   as_batch)
from .valuations import LinearExternalityModel, ValuationModel

BatchFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _pooled(values: np.ndarray, present: np.ndarray) -> np.ndarray:
    # matmul beats sum(axis=-1) on short trailing axes
    return ((values * present) @ np.ones(values.shape[-1]))[..., None]


def effective_qualities(x: np.ndarray, Q: QualityFunction, types: np.ndarray) -> np.ndarray:
    """Vectorized max(x_i, Q(t_i))."""
    return np.maximum(x, Q.unchecked(types))


@dataclass(frozen=True)
class AllocationRule:
    allocate: BatchFn
    label: str

    def __call__(self, reports, present=None) -> np.ndarray:
        if present is None:
            reports, present = as_batch(reports)
        return self.allocate(np.asarray(reports, dtype=float), np.asarray(present, dtype=bool))


@dataclass(frozen=True)
class PaymentRule:
    charge: BatchFn
    label: str

    def __call__(self, reports, present=None) -> np.ndarray:
        if present is None:
            reports, present = as_batch(reports)
        return self.charge(np.asarray(reports, dtype=float), np.asarray(present, dtype=bool))


@dataclass(frozen=True)
class Mechanism:
    allocation: AllocationRule
    payment: PaymentRule
    n: int
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", f"{self.payment.label}+{self.allocation.label}")


# -- allocation rules -------------------------------------------------------

def best_model_rule(Q: QualityFunction) -> AllocationRule:
    """Every participant gets the model trained on all contributed data."""
    def allocate(r, present):
        return Q.unchecked(_pooled(r, present)) * present
    return AllocationRule(allocate, "best-model")


def efficient_linear_rule(alpha: np.ndarray, Q: QualityFunction) -> AllocationRule:
    """Give the best model to agent i iff sum_j alpha[j, i] >= 0.

    Excluded participants are floored at the quality of their own reported
    data, which they could always train themselves.
    """
    alpha = np.asarray(alpha, dtype=float)
    include = alpha.sum(axis=0) >= 0

    def allocate(r, present):
        if r.shape[-1] != alpha.shape[0]:
            raise ValueError(f"{r.shape[-1]} reports for {alpha.shape[0]} agents")
        x = np.repeat(Q.unchecked(_pooled(r, present)), r.shape[-1], axis=-1)
        if not include.all():
            x[..., ~include] = Q.unchecked(r[..., ~include])
        x *= present
        return x
    return AllocationRule(allocate, "efficient-linear")


def give_set_rule(give: Sequence[bool], Q: QualityFunction) -> AllocationRule:
    """Best model to agents flagged in ``give``, own-report quality to the rest."""
    give = np.asarray(give, dtype=bool)

    def allocate(r, present):
        x = np.where(give, Q.unchecked(_pooled(r, present)), Q.unchecked(r))
        return np.where(present, x, 0.0)
    tag = "".join("1" if g else "0" for g in give)
    return AllocationRule(allocate, f"give[{tag}]")


def give_withhold_family(n: int, Q: QualityFunction) -> list[AllocationRule]:
    """All 2**n give/withhold combinations, give-to-everyone first."""
    return [give_set_rule(g, Q) for g in itertools.product([True, False], repeat=n)]


def efficient_allocation_linear(alpha, Q: QualityFunction, reports) -> np.ndarray:
    return efficient_linear_rule(alpha, Q)(reports)


def best_model_allocation(Q: QualityFunction, reports) -> np.ndarray:
    return best_model_rule(Q)(reports)


# -- payment rules ----------------------------------------------------------

def zero_payment() -> PaymentRule:
    return PaymentRule(lambda r, present: np.zeros(r.shape), "zero")


def _reported_values(alloc: AllocationRule, model: ValuationModel, own: np.ndarray,
                     r: np.ndarray, present: np.ndarray) -> np.ndarray:
    # reported types stand in for the unknown true types; own = Q(reports)
    return model.value(np.maximum(alloc.allocate(r, present), own))


def mep_rule(alloc: AllocationRule, model: ValuationModel, Q: QualityFunction) -> PaymentRule:
    """Maximal exploitation payment.

    Charges each participant the value difference between the reported
    profile and the profile where they alone exit, both valued at reported
    types.
    """
    def charge(r, present):
        own = Q.unchecked(r)
        v_in = _reported_values(alloc, model, own, r, present)
        p = np.zeros(r.shape)
        for i in range(r.shape[-1]):
            out = present.copy()
            out[..., i] = False
            v_out = _reported_values(alloc, model, own, r, out)
            p[..., i] = v_in[..., i] - v_out[..., i]
        return np.where(present, p, 0.0)
    return PaymentRule(charge, "mep")


def mep_payment(alloc: AllocationRule, model: ValuationModel, Q: QualityFunction,
                reports) -> np.ndarray:
    return mep_rule(alloc, model, Q)(reports)


def shifted_payment(base: PaymentRule, delta: float, agent: int | None = None,
                    where: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
                    ) -> PaymentRule:
    """``base`` plus ``delta`` for participants (one agent, or all).

    ``where`` optionally restricts the shift to report profiles it flags.
    """
    def charge(r, present):
        p = base.charge(r, present)
        mask = present.copy()
        if agent is not None:
            only = np.zeros(r.shape[-1], dtype=bool)
            only[agent] = True
            mask &= only
        if where is not None:
            mask &= np.asarray(where(r, present), dtype=bool)[..., None]
        return p + delta * mask
    who = "all" if agent is None else str(agent)
    return PaymentRule(charge, f"{base.label}{delta:+g}@{who}")


def vcg_allocation_rule(model: ValuationModel, Q: QualityFunction,
                        family: Sequence[AllocationRule]) -> AllocationRule:
    """Welfare-maximizing member of ``family`` at reported types; ties go to the earlier member."""
    family = list(family)
    if not family:
        raise ValueError("VCG needs a non-empty allocation family")

    def allocate(r, present):
        xs = np.stack([a.allocate(r, present) for a in family])
        welfare = model.value(effective_qualities(xs, Q, r)).sum(axis=-1)
        best = np.argmax(welfare, axis=0)
        return np.take_along_axis(xs, best[None, ..., None], axis=0)[0]
    return AllocationRule(allocate, "vcg-argmax" if len(family) > 1 else family[0].label)


def vcg_rule(alloc: AllocationRule, model: ValuationModel, Q: QualityFunction) -> PaymentRule:
    """Externality-harm payments: others' reported value without i minus with i."""
    def charge(r, present):
        own = Q.unchecked(r)
        v_in = _reported_values(alloc, model, own, r, present)
        others_in = v_in.sum(axis=-1, keepdims=True) - v_in
        p = np.zeros(r.shape)
        for i in range(r.shape[-1]):
            out = present.copy()
            out[..., i] = False
            v_out = _reported_values(alloc, model, own, r, out)
            p[..., i] = v_out.sum(axis=-1) - v_out[..., i] - others_in[..., i]
        return np.where(present, p, 0.0)
    return PaymentRule(charge, "vcg")


def vcg_mechanism(model: ValuationModel, allocation_family: Sequence[AllocationRule],
                  Q: QualityFunction, n: int) -> Mechanism:
    alloc = vcg_allocation_rule(model, Q, allocation_family)
    return Mechanism(alloc, vcg_rule(alloc, model, Q), n, "vcg")


def free_mechanism(Q: QualityFunction, n: int) -> Mechanism:
    return Mechanism(best_model_rule(Q), zero_payment(), n, "free")


def mep_mechanism(alloc: AllocationRule, model: ValuationModel, Q: QualityFunction,
                  n: int) -> Mechanism:
    return Mechanism(alloc, mep_rule(alloc, model, Q), n)


MECHANISMS = ("mep+efficient-linear", "mep+best-model", "vcg", "free")


def build_mechanism(name: str, model: ValuationModel, Q: QualityFunction,
                    n: int | None = None) -> Mechanism:
    n = n or model.n
    if n is None:
        raise ValueError("agent count is required")
    if name == "mep+efficient-linear":
        if not isinstance(model, LinearExternalityModel):
            raise ValueError("mep+efficient-linear needs a linear externality model")
        return mep_mechanism(efficient_linear_rule(model.alpha, Q), model, Q, n)
    if name == "mep+best-model":
        return mep_mechanism(best_model_rule(Q), model, Q, n)
    if name == "vcg":
        return vcg_mechanism(model, give_withhold_family(n, Q), Q, n)
    if name == "free":
        return free_mechanism(Q, n)
    raise KeyError(f"unknown mechanism {name!r}")


# -- evaluation -------------------------------------------------------------

def utilities(mech: Mechanism, model: ValuationModel, Q: QualityFunction,
              types: np.ndarray, reports: np.ndarray, present: np.ndarray) -> np.ndarray:
    """Batched utilities: allocation and payment from reports, qualities from true types."""
    x = mech.allocation.allocate(reports, present)
    p = mech.payment.charge(reports, present)
    return model.value(effective_qualities(x, Q, types)) - p


def run_mechanism(mech: Mechanism, model: ValuationModel, Q: QualityFunction,
                  true_types: TypeProfile | Sequence[float],
                  reports: ReportProfile | Sequence | None = None) -> Outcome:
    if not isinstance(true_types, TypeProfile):
        true_types = TypeProfile(tuple(true_types))
    if reports is None:
        reports = ReportProfile.truthful(true_types)
    elif not isinstance(reports, ReportProfile):
        reports = ReportProfile(tuple(reports))
    reports.check_against(true_types)
    if true_types.n != mech.n:
        raise ValueError(f"mechanism is for {mech.n} agents, got {true_types.n}")
    r, present = reports.as_arrays()
    t = true_types.as_array()
    Q(t)
    x = mech.allocation.allocate(r, present)
    p = mech.payment.charge(r, present)
    q = effective_qualities(x, Q, t)
    v = model.value(q)
    return Outcome(x, p, q, v, v - p)


__all__ = [
    "AllocationRule", "PaymentRule", "Mechanism", "EMPTY",
    "best_model_rule", "efficient_linear_rule", "give_set_rule", "give_withhold_family",
    "efficient_allocation_linear", "best_model_allocation",
    "zero_payment", "mep_rule", "mep_payment", "shifted_payment",
    "vcg_allocation_rule", "vcg_rule", "vcg_mechanism", "free_mechanism", "mep_mechanism",
    "build_mechanism", "utilities", "run_mechanism", "effective_qualities",
]
