"""Seeded experiment harness.

Each sample draws from its own PCG64 stream keyed by ``(seed, point, sample)``
through :class:`numpy.random.SeedSequence`, so results do not depend on the
order or thread in which samples run.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .auditors import audit_ic
from .core import DEFAULT_TOL, GridSpec, QualityFunction
from .existence import disparity_boundary
from .mechanisms import (best_model_rule, efficient_linear_rule, mep_mechanism,
                         run_mechanism, vcg_mechanism)
from .valuations import LinearExternalityModel, ProportionalFixedMarketModel

RNG_NAME = "PCG64/SeedSequence-v1"
EXPERIMENTS = ("scaling", "type-sweep", "boundary")
CSV_COLUMNS = {
    "scaling": ("n", "revenue", "welfare", "best_quality"),
    "type-sweep": ("t2", "welfare", "revenue", "uti_1", "uti_2"),
    "boundary": ("alpha", "boundary", "open_above"),
}
_EXPERIMENT_KEY = {"scaling": 1, "type-sweep": 2, "boundary": 3}


def default_threads() -> int:
    return int(os.environ.get("MPMARKET_THREADS", "1"))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    samples: int = 50
    n_range: tuple[int, ...] = tuple(range(2, 17))
    type_range: tuple[float, ...] = tuple(round(0.1 * k, 10) for k in range(21))
    alpha_range: tuple[float, ...] = (-1.0, -0.9, -0.8, -0.7, -0.68)
    cap: int = 500
    # "literal": every coefficient ~ U[-1, 1); "positive": diagonal replaced by its magnitude
    diagonal: str = "literal"
    threads: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.diagonal not in ("literal", "positive"):
            raise ValueError("diagonal must be 'literal' or 'positive'")
        rng_field = {"scaling": self.n_range, "type-sweep": self.type_range,
                     "boundary": self.alpha_range}[self.experiment]
        if len(rng_field) == 0:
            raise ValueError("empty sweep range")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class ResultRow:
    variable: str
    value: float
    metrics: dict = field(default_factory=dict)
    samples: int = 0

    def as_dict(self) -> dict:
        return {self.variable: self.value, **self.metrics}


def sample_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _draw_alpha(rng, n, diagonal):
    alpha = rng.uniform(-1.0, 1.0, (n, n))
    if diagonal == "positive":
        np.fill_diagonal(alpha, np.abs(np.diag(alpha)))
    return alpha


def _parallel(fn: Callable[[int], dict], count: int, threads: int) -> list[dict]:
    if threads <= 1:
        return [fn(k) for k in range(count)]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, range(count)))


def _mep_sample(alpha, types, Q, rng):
    n = len(types)
    model = LinearExternalityModel(alpha)
    mech = mep_mechanism(efficient_linear_rule(alpha, Q), model, Q, n)
    out = run_mechanism(mech, model, Q, types)
    # one random under-report as a spot IC check
    j = int(rng.integers(n))
    lie = list(types)
    lie[j] = float(rng.uniform(0.0, types[j]))
    dev = run_mechanism(mech, model, Q, types, lie)
    return out, dev.utilities[j] - out.utilities[j] > DEFAULT_TOL, alpha[j, j] < 0


def _means(records: list[dict]) -> dict:
    keys = records[0].keys()
    return {k: float(np.mean([r[k] for r in records])) for k in keys}


def mep_scaling_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """MEP with efficient allocation as the number of agents grows."""
    Q = QualityFunction.sigmoid()
    rows = []
    for p, n in enumerate(cfg.n_range):
        def one(s, n=n, p=p):
            rng = sample_rng(cfg.seed, _EXPERIMENT_KEY["scaling"], p, s)
            alpha = _draw_alpha(rng, n, cfg.diagonal)
            types = rng.uniform(0.0, 1.0, n)
            out, lied, neg = _mep_sample(alpha, types, Q, rng)
            return {"revenue": out.revenue, "welfare": out.welfare,
                    "best_quality": float(Q(types.sum())),
                    "spot_ic_violations": float(lied), "unexplained_violations": float(lied and not neg)}
        recs = _parallel(one, cfg.samples, cfg.threads)
        m = _means(recs)
        m["spot_ic_violations"] *= cfg.samples
        m["unexplained_violations"] *= cfg.samples
        m["revenue_welfare_ratio"] = m["revenue"] / m["welfare"] if m["welfare"] else float("nan")
        rows.append(ResultRow("n", n, m, cfg.samples))
    return rows


def mep_type_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    """Two agents, first type fixed at 1, second swept."""
    Q = QualityFunction.sigmoid()
    rows = []
    for p, t2 in enumerate(cfg.type_range):
        def one(s, t2=t2, p=p):
            rng = sample_rng(cfg.seed, _EXPERIMENT_KEY["type-sweep"], p, s)
            alpha = _draw_alpha(rng, 2, cfg.diagonal)
            out, lied, neg = _mep_sample(alpha, np.array([1.0, float(t2)]), Q, rng)
            return {"welfare": out.welfare, "revenue": out.revenue,
                    "uti_1": float(out.utilities[0]), "uti_2": float(out.utilities[1]),
                    "spot_ic_violations": float(lied), "unexplained_violations": float(lied and not neg)}
        recs = _parallel(one, cfg.samples, cfg.threads)
        m = _means(recs)
        m["spot_ic_violations"] *= cfg.samples
        m["unexplained_violations"] *= cfg.samples
        rows.append(ResultRow("t2", float(t2), m, cfg.samples))
    return rows


def boundary_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    """Disparity boundary of the two-agent power-law market per growth rate."""
    def one(k):
        res = disparity_boundary(cfg.alpha_range[k], cfg.cap, 2)
        return {"boundary": res.boundary, "open_above": res.open_above, "monotone": res.monotone}
    recs = _parallel(one, len(cfg.alpha_range), cfg.threads)
    return [ResultRow("alpha", float(a), r, 1) for a, r in zip(cfg.alpha_range, recs)]


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    return {"scaling": mep_scaling_experiment, "type-sweep": mep_type_sweep,
            "boundary": boundary_sweep}[cfg.experiment](cfg)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def rows_to_csv(experiment: str, rows: Sequence[ResultRow]) -> str:
    cols = CSV_COLUMNS[experiment]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        d = row.as_dict()
        w.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()


def least_squares_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


# -- the fixed-market VCG counterexample -------------------------------------

def _exact_vcg_utilities(types: Sequence[Fraction], reports: Sequence[Fraction]) -> list[Fraction]:
    """VCG with the give-everyone-the-pooled-model allocation in the
    proportional market, Q the identity, in exact arithmetic."""
    n = len(types)

    def shares(q):
        total = sum(q)
        return [qi / total for qi in q] if total else [Fraction(0)] * n

    pooled = sum(reports)
    v_true = shares([max(pooled, t) for t in types])
    v_rep = shares([max(pooled, r) for r in reports])
    utils = []
    for i in range(n):
        rest = pooled - reports[i]
        v_out = shares([reports[j] if j == i else max(rest, reports[j]) for j in range(n)])
        pay = sum(v_out[j] - v_rep[j] for j in range(n) if j != i)
        utils.append(v_true[i] - pay)
    return utils


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def vcg_counterexample_report(t1: int = 10, t2: int = 1, lie: int = 3) -> dict:
    """Truthful versus under-reporting utility of agent 1 under VCG."""
    T = [Fraction(t1), Fraction(t2)]
    honest = _exact_vcg_utilities(T, T)[0]
    lying = _exact_vcg_utilities(T, [Fraction(lie), Fraction(t2)])[0]

    Q = QualityFunction.linear(2 * t1)
    model = ProportionalFixedMarketModel(2)
    mech = vcg_mechanism(model, [best_model_rule(Q)], Q, 2)
    honest_f = float(run_mechanism(mech, model, Q, (t1, t2)).utilities[0])
    lying_f = float(run_mechanism(mech, model, Q, (t1, t2), (lie, t2)).utilities[0])
    audit = audit_ic(mech, model, Q, GridSpec(float(t1), 1.0))
    flagged = any(v.profile == (float(t1), float(t2)) and v.agent == 0 and v.deviation == float(lie)
                  for v in audit.violations)
    return {
        "instance": {"types": [t1, t2], "deviation": lie, "market": "proportional",
                     "quality": "identity", "allocation": "pooled-model-to-all"},
        "truthful_u1": _frac(honest), "truthful_u1_float": honest_f,
        "deviating_u1": _frac(lying), "deviating_u1_float": lying_f,
        "ic_margin": _frac(lying - honest),
        "ic_violated": lying > honest,
        "audit_flags_deviation": flagged,
        "audit_violations": len(audit.violations),
    }
