"""Existence of a desirable mechanism under a fixed efficient allocation.

For each agent and each profile of the others' reports, the IR caps and the
pairwise IC gaps on that agent's payments form a system of difference
constraints. Its maximal solution is the shortest-path distance from a base
vertex in a DAG ordered by report. A desirable mechanism exists iff those
maximal payments already collect a nonnegative total at every truthful
profile.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import DEFAULT_TOL, EMPTY, GridSpec, QualityFunction, Report
from .mechanisms import (AllocationRule, Mechanism, PaymentRule, best_model_rule,
                         effective_qualities, run_mechanism, zero_payment)
from .valuations import PowerMarketModel, ValuationModel

ORACLE_MAX_AGENTS = 2
ORACLE_MAX_DISPARITY = 5


# -- per-slice quantities ---------------------------------------------------

def _slice_setup(n, i, others: Sequence[Report], pts):
    if len(others) != n - 1:
        raise ValueError(f"need {n - 1} other reports, got {len(others)}")
    mask = np.arange(n) != i
    o_present = np.array([r is not EMPTY for r in others], dtype=bool)
    o_vals = np.array([0.0 if r is EMPTY else float(r) for r in others])
    G = len(pts)
    R = np.empty((G, n))
    R[:, mask] = o_vals
    R[:, i] = pts
    present = np.ones((G, n), dtype=bool)
    present[:, mask] = o_present
    return R, present


def _slice_bounds(model: ValuationModel, Q: QualityFunction, alloc: AllocationRule,
                  n: int, i: int, others: Sequence[Report], pts: np.ndarray):
    """IR caps and IC gaps for one slice.

    Returns ``(cap, gap)`` where ``cap[b]`` bounds the payment at report
    ``pts[b]`` and ``gap[a, b]`` bounds ``p(pts[b]) - p(pts[a])``. Absent
    others count as type 0.
    """
    R, present = _slice_setup(n, i, others, pts)
    T = R  # truthful: reports are the true types, absent entries already 0
    x_in = alloc.allocate(R, present)
    v_in = model.value(effective_qualities(x_in, Q, T))[:, i]
    out = present.copy()
    out[:, i] = False
    v_out = model.value(effective_qualities(alloc.allocate(R, out), Q, T))[:, i]
    cap = v_in - v_out
    # row a: allocation at report pts[a]; column b: true own type pts[b]
    q_dev = np.maximum(x_in[:, None, :], Q.unchecked(T)[None, :, :])
    gap = v_in[None, :] - model.value(q_dev)[..., i]
    return cap, gap


def payment_upper_bound(model: ValuationModel, Q: QualityFunction, alloc: AllocationRule,
                        i: int, t_i: float, others: Sequence[Report], n: int | None = None
                        ) -> float:
    """Largest IR payment for a truthful agent ``i``: value in minus value out."""
    n = n or len(others) + 1
    cap, _ = _slice_bounds(model, Q, alloc, n, i, others, np.array([float(t_i)]))
    return float(cap[0])


def gap(model: ValuationModel, Q: QualityFunction, alloc: AllocationRule, i: int,
        low: float, high: float, others: Sequence[Report], n: int | None = None) -> float:
    """IC bound on p(high) - p(low) for an agent whose true type is ``high``."""
    if low > high:
        raise ValueError(f"report {low} above true type {high}")
    n = n or len(others) + 1
    _, g = _slice_bounds(model, Q, alloc, n, i, others, np.array([float(low), float(high)]))
    return float(g[0, 1])


def dag_shortest_paths(cap: np.ndarray, gap: np.ndarray) -> np.ndarray:
    """Distances from the base vertex in the report-ordered constraint DAG."""
    G = len(cap)
    dist = np.array(cap, dtype=float)
    for b in range(1, G):
        via = dist[:b] + gap[:b, b]
        dist[b] = min(dist[b], via.min())
    return dist


def constraint_edges(cap: np.ndarray, gap: np.ndarray) -> list[tuple[int, int, float]]:
    """Edge list of the constraint graph; vertex 0 is the base, report k is vertex k+1."""
    G = len(cap)
    edges = [(0, b + 1, float(cap[b])) for b in range(G)]
    edges += [(a + 1, b + 1, float(gap[a, b])) for b in range(G) for a in range(b)]
    return edges


def bellman_ford(n_vertices: int, edges: Sequence[tuple[int, int, float]],
                 source: int = 0) -> list[float]:
    """Plain Bellman-Ford; raises on a negative cycle."""
    dist = [math.inf] * n_vertices
    dist[source] = 0.0
    for _ in range(n_vertices - 1):
        changed = False
        for u, v, w in edges:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            break
    for u, v, w in edges:
        if dist[u] + w < dist[v] - 1e-12:
            raise ValueError("negative cycle")
    return dist


def max_payments_slice(model: ValuationModel, Q: QualityFunction, alloc: AllocationRule,
                       i: int, others: Sequence[Report], grid: GridSpec,
                       n: int | None = None) -> np.ndarray:
    """Maximal feasible payments of agent ``i`` over the grid for one profile of the others."""
    n = n or len(others) + 1
    cap, g = _slice_bounds(model, Q, alloc, n, i, others, grid.values())
    return dag_shortest_paths(cap, g)


# -- whole-instance decision ------------------------------------------------

def _slice_code(idx: np.ndarray, base: int) -> np.ndarray:
    """Mixed-radix index of the others' coordinates (0 = EMPTY, k + 1 = grid point k)."""
    code = np.zeros(idx.shape[:-1], dtype=np.int64)
    for col in range(idx.shape[-1]):
        code = code * base + idx[..., col]
    return code


@dataclass
class PaymentTable:
    """Maximal payments ``p_max[i, k, s]`` for agent i reporting grid point k
    while the others report slice ``s`` (mixed radix over EMPTY + grid)."""

    p_max: np.ndarray
    grid: GridSpec
    n: int
    feasible: bool
    witness: tuple[float, ...] | None = None
    min_budget: float = math.inf
    tol: float = DEFAULT_TOL

    def slice_index(self, others: Sequence[Report]) -> int:
        coords = np.array([0 if r is EMPTY else int(self.grid.index(r)) + 1 for r in others])
        return int(_slice_code(coords, self.grid.size + 1)) if len(coords) else 0

    def lookup(self, i: int, t_i: float, others: Sequence[Report]) -> float:
        return float(self.p_max[i, int(self.grid.index(t_i)), self.slice_index(others)])

    def budgets(self) -> tuple[np.ndarray, np.ndarray]:
        """Truthful profiles (as grid indices) and the total maximal payment at each."""
        G = self.grid.size
        idx = np.array(list(itertools.product(range(G), repeat=self.n)), dtype=np.int64)
        total = np.zeros(len(idx))
        for i in range(self.n):
            others = np.delete(idx, i, axis=1) + 1
            total += self.p_max[i, idx[:, i], _slice_code(others, G + 1)]
        return idx, total

    def payment_rule(self) -> PaymentRule:
        """Payment rule charging ``p_max``; reports must lie on the grid."""
        G, n, table = self.grid.size, self.n, self.p_max

        def charge(r, present):
            k = np.where(present, self.grid.index(r), -1)
            if np.any(k >= G):
                raise ValueError("report above the grid")
            p = np.zeros(r.shape)
            for i in range(n):
                others = np.delete(k, i, axis=-1) + 1
                p[..., i] = table[i, np.clip(k[..., i], 0, None), _slice_code(others, G + 1)]
            return np.where(present, p, 0.0)
        return PaymentRule(charge, "p_max")

    def to_rows(self) -> list[dict]:
        pts = self.grid.values()
        labels = ["∅"] + [f"{v:g}" for v in pts]
        rows = []
        for i in range(self.n):
            for s, coords in enumerate(itertools.product(range(len(labels)), repeat=self.n - 1)):
                for k, t in enumerate(pts):
                    rows.append({"agent": i, "t_i": float(t),
                                 "others": " ".join(labels[c] for c in coords),
                                 "p_max": float(self.p_max[i, k, s])})
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["agent", "t_i", "others", "p_max"], lineterminator="\n")
        w.writeheader()
        for row in self.to_rows():
            w.writerow({**row, "p_max": repr(row["p_max"])})
        return buf.getvalue()


def desirable_exists(model: ValuationModel, Q: QualityFunction, alloc: AllocationRule,
                     n: int, grid: GridSpec, tol: float = DEFAULT_TOL) -> PaymentTable:
    """Decide whether an IC, IR, weakly budget-balanced payment exists for ``alloc``.

    Returns the table of revenue-maximal payments; ``feasible`` is False with
    the first truthful profile (lexicographic) whose maximal payments sum
    below ``-tol``.
    """
    pts = grid.values()
    G = len(pts)
    labels: list[Report] = [EMPTY] + [float(v) for v in pts]
    slices = list(itertools.product(labels, repeat=n - 1))
    table = np.empty((n, G, len(slices)))
    for i in range(n):
        for s, others in enumerate(slices):
            cap, g = _slice_bounds(model, Q, alloc, n, i, others, pts)
            table[i, :, s] = dag_shortest_paths(cap, g)
    result = PaymentTable(table, grid, n, True, tol=tol)
    idx, total = result.budgets()
    result.min_budget = float(total.min())
    bad = np.flatnonzero(total < -tol)
    if bad.size:
        result.feasible = False
        result.witness = tuple(float(pts[k]) for k in idx[bad[0]])
    return result


def brute_force_oracle(model: ValuationModel, Q: QualityFunction, alloc: AllocationRule,
                       n: int, grid: GridSpec, tol: float = DEFAULT_TOL) -> bool:
    """Independent feasibility check for tiny instances.

    Evaluates every constraint one profile at a time through
    :func:`run_mechanism`, propagates all upper bounds to a fixpoint over the
    full payment system and then checks every budget sum.
    """
    if n > ORACLE_MAX_AGENTS or grid.disparity > ORACLE_MAX_DISPARITY:
        raise ValueError("instance too large for the brute-force oracle")
    pts = [float(v) for v in grid.values()]
    options: list[Report] = [EMPTY] + pts
    probe = Mechanism(alloc, zero_payment(), n)

    def val(i, true, reports):
        return float(run_mechanism(probe, model, Q, true, reports).values[i])

    def full(i, mine, others):
        prof = list(others)
        prof.insert(i, mine)
        return prof

    upper: dict[tuple, float] = {}
    diffs: list[tuple[tuple, tuple, float]] = []
    for i in range(n):
        for others in itertools.product(options, repeat=n - 1):
            true_others = [0.0 if o is EMPTY else o for o in others]
            for t in pts:
                true = full(i, t, true_others)
                stay = val(i, true, full(i, t, others))
                leave = val(i, true, full(i, EMPTY, others))
                upper[(i, t, others)] = stay - leave
                for low in pts:
                    if low < t:
                        lied = val(i, true, full(i, low, others))
                        diffs.append(((i, low, others), (i, t, others), stay - lied))
    bound = dict(upper)
    changed = True
    while changed:
        changed = False
        for a, b, w in diffs:
            if bound[a] + w < bound[b]:
                bound[b] = bound[a] + w
                changed = True
    for prof in itertools.product(pts, repeat=n):
        total = sum(bound[(i, prof[i], tuple(prof[:i] + prof[i + 1:]))] for i in range(n))
        if total < -tol:
            return False
    return True


# -- disparity boundary -----------------------------------------------------

@dataclass
class DisparityBoundary:
    growth: float
    boundary: int
    open_above: bool
    feasible: list[bool] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return all(a >= b for a, b in zip(self.feasible, self.feasible[1:]))


def _boundary_from_sequence(growth, seq, cap):
    feasible_ds = [d for d, ok in enumerate(seq, start=1) if ok]
    boundary = max(feasible_ds) if feasible_ds else 0
    return DisparityBoundary(growth, boundary, all(seq) and len(seq) == cap, list(seq))


def disparity_boundary(growth: float, cap: int, n: int = 2, method: str = "incremental",
                       tol: float = DEFAULT_TOL) -> DisparityBoundary:
    """Largest disparity D/eps with a desirable mechanism in the power-law market.

    Types live on {0, 1, ..., D}; Q is the identity rescaled by ``n * cap`` so
    every pooled data size keeps quality <= 1 (the market is homogeneous, so
    rescaling changes no feasibility decision).

    ``method="scan"`` calls :func:`desirable_exists` for every D in turn.
    ``method="incremental"`` solves once at ``cap``: payments at report t only
    depend on reports up to t, so the table for any D is the restriction of
    the table for ``cap`` and each D only adds budget checks.
    """
    model = PowerMarketModel(growth, n)
    if method == "scan":
        seq = []
        for d in range(1, cap + 1):
            Q = QualityFunction.linear(n * d)
            table = desirable_exists(model, Q, best_model_rule(Q), n, GridSpec(d, 1.0), tol)
            seq.append(table.feasible)
        return _boundary_from_sequence(growth, seq, cap)
    if method != "incremental":
        raise ValueError(f"unknown method {method!r}")
    Q = QualityFunction.linear(n * cap)
    alloc = best_model_rule(Q)
    grid = GridSpec(cap, 1.0)
    pts = grid.values()
    G = len(pts)
    slices = list(itertools.product(range(G), repeat=n - 1))
    # only grid-valued slices enter budget checks
    table = np.empty((n, G) + (G,) * (n - 1))
    for i in range(n):
        for coords in slices:
            others = [float(pts[c]) for c in coords]
            cap_, g = _slice_bounds(model, Q, alloc, n, i, others, pts)
            table[(i, slice(None)) + coords] = dag_shortest_paths(cap_, g)
    total = np.zeros((G,) * n)
    for i in range(n):
        # table[i] axes: (own, others in index order) -> move own to axis i
        total += np.moveaxis(table[i], 0, i)
    worst = total
    for axis in range(n):
        worst = np.minimum.accumulate(worst, axis=axis)
    diag = worst[(np.arange(G),) * n]
    seq = [bool(diag[d] >= -tol) for d in range(1, G)]
    return _boundary_from_sequence(growth, seq, cap)
