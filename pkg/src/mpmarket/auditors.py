"""Grid audits of mechanism properties.

Every audit enumerates truthful type profiles on ``grid ** n`` and evaluates
the relevant deviations in batches. Violations are returned in profile order,
so a report is a deterministic function of its inputs.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import DEFAULT_TOL, EMPTY, GridSpec, QualityFunction
from .mechanisms import (AllocationRule, Mechanism, effective_qualities,
                         give_withhold_family, utilities)
from .valuations import ValuationModel


class Property(str, enum.Enum):
    IC = "IC"
    IR = "IR"
    WBB = "WBB"
    EFFICIENCY = "EFFICIENCY"
    DESIRABLE = "DESIRABLE"
    NECESSARY_COND = "NECESSARY_COND"
    SUFFICIENT_COND = "SUFFICIENT_COND"


@dataclass(frozen=True)
class Violation:
    profile: tuple[float, ...]
    agent: int | None
    deviation: Any
    margin: float
    kind: str = ""

    def to_dict(self) -> dict:
        dev = None if self.deviation is EMPTY else self.deviation
        return {"profile": list(self.profile), "agent": self.agent,
                "deviation": dev, "empty": self.deviation is EMPTY,
                "margin": self.margin, "kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "Violation":
        dev = EMPTY if d.get("empty") else d["deviation"]
        return cls(tuple(d["profile"]), d["agent"], dev, d["margin"], d.get("kind", ""))


@dataclass(frozen=True)
class AuditReport:
    property: Property
    violations: tuple[Violation, ...]
    tolerance: float
    grid: GridSpec
    details: dict = field(default_factory=dict, compare=True)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"property": self.property.value, "passed": self.passed,
                "tolerance": self.tolerance, "grid": self.grid.to_dict(),
                "violations": [v.to_dict() for v in self.violations],
                "details": self.details}

    @classmethod
    def from_dict(cls, d: dict) -> "AuditReport":
        return cls(Property(d["property"]),
                   tuple(Violation.from_dict(v) for v in d["violations"]),
                   d["tolerance"], GridSpec.from_dict(d["grid"]), d.get("details", {}))

    def summary(self) -> str:
        state = "passed" if self.passed else f"FAILED ({len(self.violations)} violations)"
        return f"{self.property.value}: {state}"


def truthful_profiles(grid: GridSpec, n: int) -> np.ndarray:
    pts = grid.values()
    return np.array(list(itertools.product(pts, repeat=n)), dtype=float).reshape(-1, n)


def _report(prop, violations, tol, grid, details=None) -> AuditReport:
    return AuditReport(prop, tuple(violations), tol, grid, details or {})


def audit_ic(mech: Mechanism, model: ValuationModel, Q: QualityFunction, grid: GridSpec,
             tol: float = DEFAULT_TOL) -> AuditReport:
    """Truthful reporting versus every lower grid report, others truthful."""
    n = mech.n
    G = grid.size
    T = truthful_profiles(grid, n)
    idx = grid.index(T)
    present = np.ones_like(T, dtype=bool)
    x = mech.allocation.allocate(T, present)
    p = mech.payment.charge(T, present)
    u0 = model.value(effective_qualities(x, Q, T)) - p
    found = []
    worst = math.inf
    pts = grid.values()
    for i in range(n):
        # rows of T double as deviation profiles: report in column i, truthful others;
        # only the deviator's true type varies, which moves q_i and nothing else
        stride = G ** (n - 1 - i)
        for k in range(1, G):
            dev = np.flatnonzero(idx[:, i] < k)
            truth = dev + (k - idx[dev, i]) * stride
            q = effective_qualities(x[dev], Q, T[truth])
            u = model.value(q)[:, i] - p[dev, i]
            margin = u0[truth, i] - u
            worst = min(worst, float(margin.min()))
            for j in np.flatnonzero(margin < -tol):
                found.append((int(truth[j]), i, float(pts[idx[dev[j], i]]), float(margin[j])))
    found.sort()
    violations = [Violation(tuple(map(float, T[row])), i, d, m) for row, i, d, m in found]
    return _report(Property.IC, violations, tol, grid, {"min_margin": worst})


def ir_margins(mech: Mechanism, model: ValuationModel, Q: QualityFunction,
               grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Utility of truthful participation minus utility of exiting, per profile and agent."""
    n = mech.n
    T = truthful_profiles(grid, n)
    present = np.ones_like(T, dtype=bool)
    u0 = utilities(mech, model, Q, T, T, present)
    margins = np.empty_like(u0)
    for i in range(n):
        out = present.copy()
        out[:, i] = False
        margins[:, i] = u0[:, i] - utilities(mech, model, Q, T, T, out)[:, i]
    return T, margins


def audit_ir(mech: Mechanism, model: ValuationModel, Q: QualityFunction, grid: GridSpec,
             tol: float = DEFAULT_TOL) -> AuditReport:
    T, margins = ir_margins(mech, model, Q, grid)
    rows, agents = np.nonzero(margins < -tol)
    violations = [Violation(tuple(map(float, T[r])), int(i), EMPTY, float(margins[r, i]))
                  for r, i in zip(rows, agents)]
    details = {"min_margin": float(margins.min()), "max_margin": float(margins.max())}
    return _report(Property.IR, violations, tol, grid, details)


def audit_wbb(mech: Mechanism, grid: GridSpec, tol: float = DEFAULT_TOL) -> AuditReport:
    T = truthful_profiles(grid, mech.n)
    revenue = mech.payment.charge(T, np.ones_like(T, dtype=bool)).sum(axis=-1)
    violations = [Violation(tuple(map(float, T[r])), None, None, float(revenue[r]))
                  for r in np.flatnonzero(revenue < -tol)]
    return _report(Property.WBB, violations, tol, grid, {"min_revenue": float(revenue.min())})


def audit_efficiency(mech: Mechanism, model: ValuationModel, Q: QualityFunction,
                     grid: GridSpec, allocation_family: Sequence[AllocationRule] | None = None,
                     tol: float = DEFAULT_TOL) -> AuditReport:
    """Welfare at truthful profiles against the best member of ``allocation_family``.

    The default family is the give-best-model / withhold lattice.
    """
    family = list(allocation_family) if allocation_family is not None \
        else give_withhold_family(mech.n, Q)
    if not family:
        raise ValueError("empty allocation family")
    T = truthful_profiles(grid, mech.n)
    present = np.ones_like(T, dtype=bool)

    def welfare(rule):
        return model.value(effective_qualities(rule.allocate(T, present), Q, T)).sum(axis=-1)

    own = welfare(mech.allocation)
    rivals = np.stack([welfare(a) for a in family])
    best = rivals.max(axis=0)
    winner = rivals.argmax(axis=0)
    gap = own - best
    violations = [Violation(tuple(map(float, T[r])), None, family[winner[r]].label, float(gap[r]))
                  for r in np.flatnonzero(gap < -tol)]
    return _report(Property.EFFICIENCY, violations, tol, grid)


def audit_desirable(mech: Mechanism, model: ValuationModel, Q: QualityFunction,
                    grid: GridSpec, allocation_family: Sequence[AllocationRule] | None = None,
                    tol: float = DEFAULT_TOL) -> AuditReport:
    parts = [audit_ic(mech, model, Q, grid, tol), audit_ir(mech, model, Q, grid, tol),
             audit_wbb(mech, grid, tol),
             audit_efficiency(mech, model, Q, grid, allocation_family, tol)]
    violations = []
    for part in parts:
        violations += [Violation(v.profile, v.agent, v.deviation, v.margin, part.property.value)
                       for v in part.violations]
    details = {p.property.value: p.passed for p in parts}
    return _report(Property.DESIRABLE, violations, tol, grid, details)


# -- differential conditions --------------------------------------------------

class _Slice:
    """Agent ``i`` against fixed truthful others, with reported and true own type free."""

    def __init__(self, mech, model, Q, grid, i, others, quad_step):
        self.mech, self.model, self.Q = mech, model, Q
        self.i, self.n = i, mech.n
        self.upper = grid.upper
        self.h = quad_step
        self.others = np.asarray(others, dtype=float)
        per_cell = max(1, math.ceil(grid.step / quad_step - 1e-9))
        self.stride = per_cell
        self.nodes = np.linspace(0.0, grid.upper, (grid.size - 1) * per_cell + 1)

    def _reports(self, s):
        s = np.asarray(s, dtype=float)
        R = np.empty(s.shape + (self.n,))
        R[..., np.arange(self.n) != self.i] = self.others
        R[..., self.i] = s
        return R

    def qualities(self, s_rep, s_true, present_i=True):
        R = self._reports(s_rep)
        present = np.ones(R.shape, dtype=bool)
        present[..., self.i] = present_i
        x = self.mech.allocation.allocate(R, present)
        T = R.copy()
        T[..., self.i] = s_true
        return effective_qualities(x, self.Q, T)

    def value(self, s_rep, s_true, present_i=True):
        return self.model.value(self.qualities(s_rep, s_true, present_i))[..., self.i]

    def _fd(self, s, fn):
        lo = np.maximum(s - self.h, 0.0)
        hi = np.minimum(s + self.h, self.upper)
        return (fn(hi) - fn(lo)) / (hi - lo)[..., None]

    def d_report(self, s_rep, s_true):
        """Partial of v_i in the reported own type, chained through the allocation."""
        s_rep = np.asarray(s_rep, dtype=float)
        s_true = np.broadcast_to(s_true, s_rep.shape)
        dq = self._fd(s_rep, lambda s: self.qualities(s, s_true))
        jac = self.model.gradient(self.qualities(s_rep, s_true))
        return np.einsum("...j,...j->...", jac[..., self.i, :], dq)

    def d_true_exit(self, s):
        """Partial of v_i in the true own type when agent i stays out."""
        s = np.asarray(s, dtype=float)
        dq = self._fd(s, lambda u: self.qualities(u, u, present_i=False))
        jac = self.model.gradient(self.qualities(s, s, present_i=False))
        return np.einsum("...j,...j->...", jac[..., self.i, :], dq)

    def payments(self, pts):
        R = self._reports(pts)
        return self.mech.payment.charge(R, np.ones(R.shape, dtype=bool))[..., self.i]

    def cumulative(self, f):
        dx = np.diff(self.nodes)
        return np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * dx)])

    def profile(self, t_i):
        return tuple(map(float, self._reports(t_i)))


def _slices(mech, grid):
    pts = grid.values()
    for i in range(mech.n):
        for others in itertools.product(pts, repeat=mech.n - 1):
            yield i, others


def _eq1(sl, tol):
    p0 = float(sl.payments(np.array(0.0)))
    bound = float(sl.value(0.0, 0.0) - sl.value(0.0, 0.0, present_i=False))
    return bound - p0


def check_necessary_conditions(mech: Mechanism, model: ValuationModel, Q: QualityFunction,
                               grid: GridSpec, quad_step: float = 1e-3,
                               tol: float = 1e-6) -> AuditReport:
    """Payment bounds every IC and IR mechanism obeys.

    Checks, for each agent and truthful slice of the others:
    the zero-report payment is at most the participation gain at true type 0,
    and the payment increase between two grid reports is at most the integral
    of the report-side partial of the value along the diagonal.
    """
    pts = grid.values()
    violations = []
    for i, others in _slices(mech, grid):
        sl = _Slice(mech, model, Q, grid, i, others, quad_step)
        m1 = _eq1(sl, tol)
        if m1 < -tol:
            violations.append(Violation(sl.profile(0.0), i, 0.0, m1, "eq1"))
        cum = sl.cumulative(sl.d_report(sl.nodes, sl.nodes))[::sl.stride]
        p = sl.payments(pts)
        slack = (cum[None, :] - cum[:, None]) - (p[None, :] - p[:, None])
        a_idx, b_idx = np.nonzero(np.triu(slack < -tol, k=1))
        for a, b in zip(a_idx, b_idx):
            violations.append(Violation(sl.profile(pts[b]), i, float(pts[a]),
                                        float(slack[a, b]), "eq2"))
    return _report(Property.NECESSARY_COND, violations, tol, grid, {"quad_step": quad_step})


def check_sufficient_conditions(mech: Mechanism, model: ValuationModel, Q: QualityFunction,
                                grid: GridSpec, quad_step: float = 1e-3,
                                tol: float = 1e-6) -> AuditReport:
    """Conditions under which a mechanism is guaranteed IC and IR.

    Per slice: the zero-report payment bound, the report-side partial
    being smallest when the true type equals the report, and the payment
    increase bounded by the diagonal integral minus the exit-value growth.
    Slices meeting all three are listed under ``details["satisfied_slices"]``.
    """
    pts = grid.values()
    G = len(pts)
    violations, satisfied = [], []
    for i, others in _slices(mech, grid):
        sl = _Slice(mech, model, Q, grid, i, others, quad_step)
        bad = []
        m1 = _eq1(sl, tol)
        if m1 < -tol:
            bad.append(Violation(sl.profile(0.0), i, 0.0, m1, "eq1"))
        rep, true = np.meshgrid(pts, pts, indexing="ij")
        deriv = sl.d_report(rep, true)  # [report index, true index]
        for a in range(G - 1):
            rest = deriv[a, a + 1:]
            k = int(np.argmin(rest))
            margin = float(rest[k] - deriv[a, a])
            if margin < -tol:
                bad.append(Violation(sl.profile(pts[a + 1 + k]), i, float(pts[a]), margin, "eq3"))
        diag = sl.cumulative(sl.d_report(sl.nodes, sl.nodes))[::sl.stride]
        growth = sl.cumulative(sl.d_true_exit(sl.nodes))[::sl.stride]
        room = diag - growth
        p = sl.payments(pts)
        slack = (room[None, :] - room[:, None]) - (p[None, :] - p[:, None])
        a_idx, b_idx = np.nonzero(np.triu(slack < -tol, k=1))
        for a, b in zip(a_idx, b_idx):
            bad.append(Violation(sl.profile(pts[b]), i, float(pts[a]), float(slack[a, b]), "eq4"))
        if bad:
            violations += bad
        else:
            satisfied.append([i, list(map(float, others))])
    details = {"quad_step": quad_step, "satisfied_slices": satisfied}
    return _report(Property.SUFFICIENT_COND, violations, tol, grid, details)
