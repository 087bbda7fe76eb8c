"""Domain types shared by every other module.

Types (valid data sizes) and reports are plain floats; a non-participating
agent reports the :data:`EMPTY` sentinel, which is never encoded as a number.
Internally the batched code paths carry reports as a pair of arrays
``(values, present)`` where ``present`` is a boolean participation mask and
absent entries hold ``0.0`` in ``values``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

DEFAULT_TOL = 1e-9


class _Empty(enum.Enum):
    EMPTY = "∅"

    def __repr__(self) -> str:
        return "EMPTY"

    def __str__(self) -> str:
        return "∅"


#: Non-participation report. Distinct from a report of ``0.0``.
EMPTY = _Empty.EMPTY

Report = Union[float, _Empty]


def is_empty(report) -> bool:
    return report is EMPTY


@dataclass(frozen=True)
class QualityFunction:
    """Monotone bounded map from valid data size to model quality.

    ``domain`` is the largest data size the function accepts; evaluation
    beyond it (or below zero) raises ``ValueError``.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    label: str
    domain: float = math.inf
    derivative: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __call__(self, s):
        arr = np.asarray(s, dtype=float)
        if np.any(arr < 0) or np.any(arr > self.domain * (1 + 1e-12)):
            raise ValueError(
                f"{self.label}: data size outside [0, {self.domain}]: {s!r}")
        out = self.fn(arr)
        return float(out) if np.ndim(out) == 0 else out

    def unchecked(self, s: np.ndarray) -> np.ndarray:
        """Vectorized evaluation without domain checks (hot loops)."""
        return self.fn(s)

    def grad(self, s: np.ndarray, h: float = 1e-6) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.derivative is not None:
            return self.derivative(s)
        lo = np.maximum(s - h, 0.0)
        return (self.fn(s + h) - self.fn(lo)) / (s + h - lo)

    @classmethod
    def identity(cls, domain: float = 1.0) -> "QualityFunction":
        """Q(t) = t, restricted to ``[0, domain]`` with ``domain <= 1``."""
        if not 0 < domain <= 1:
            raise ValueError("identity quality needs 0 < domain <= 1 to stay bounded by 1")
        return cls(lambda s: s * 1.0, "identity", domain, lambda s: np.ones_like(s))

    @classmethod
    def linear(cls, scale: float) -> "QualityFunction":
        """Q(t) = t / scale on ``[0, scale]``.

        Rescaled identity. Power-law and proportional markets are homogeneous in
        the quality vector, so this is interchangeable with the identity for
        every feasibility question while keeping Q <= 1.
        """
        if scale <= 0:
            raise ValueError("scale must be positive")
        if scale == 1:
            return cls.identity(1.0)
        inv = 1.0 / scale
        return cls(lambda s: s * inv, f"identity/{scale:g}", float(scale),
                   lambda s: np.full_like(s, inv))

    @classmethod
    def sigmoid(cls) -> "QualityFunction":
        """Q(t) = (1 - e^-t) / (1 + e^-t), i.e. tanh(t/2)."""
        return cls(lambda s: np.tanh(s / 2.0), "sigmoid", math.inf,
                   lambda s: 0.5 / np.cosh(s / 2.0) ** 2)


def quality_function(name: str, **params) -> QualityFunction:
    if name == "identity":
        return QualityFunction.identity(**params)
    if name == "linear":
        return QualityFunction.linear(**params)
    if name == "sigmoid":
        return QualityFunction.sigmoid()
    raise KeyError(f"unknown quality function {name!r}")


QUALITY_FUNCTIONS = ("identity", "linear", "sigmoid")


def check_quality_function(Q: QualityFunction, rng: np.random.Generator,
                           pairs: int = 1000, upper: float | None = None) -> None:
    """Spot-check the boundedness and monotonicity of ``Q``.

    Monotonicity is checked as non-decreasing: saturating functions are
    flat in floating point far out.

    Raises ``AssertionError`` with the offending point on failure.
    """
    hi = min(Q.domain, 50.0) if upper is None else upper
    if Q(0.0) != 0.0:
        raise AssertionError(f"{Q.label}: Q(0) = {Q(0.0)}")
    a = rng.uniform(0, hi, pairs)
    b = rng.uniform(0, hi, pairs)
    lo, up = np.minimum(a, b), np.maximum(a, b)
    keep = up > lo
    qa, qb = Q(lo[keep]), Q(up[keep])
    if np.any(qb > 1.0):
        raise AssertionError(f"{Q.label}: Q exceeds 1 at {up[keep][qb > 1][0]}")
    bad = ~(qb >= qa)
    if np.any(bad):
        raise AssertionError(f"{Q.label}: not increasing at {lo[keep][bad][0]}, {up[keep][bad][0]}")


def effective_quality(x_i: float, Q: QualityFunction, t_i: float) -> float:
    """Quality of the model agent ``i`` actually deploys: max(x_i, Q(t_i))."""
    if not 0.0 <= x_i <= 1.0:
        raise ValueError(f"allocation {x_i} outside [0, 1]")
    if t_i < 0:
        raise ValueError(f"negative data size {t_i}")
    return max(float(x_i), Q(t_i))


@dataclass(frozen=True)
class TypeProfile:
    types: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(float(t) for t in self.types))
        if any(t < 0 or math.isnan(t) for t in self.types):
            raise ValueError(f"types must be nonnegative: {self.types}")

    @property
    def n(self) -> int:
        return len(self.types)

    def as_array(self) -> np.ndarray:
        return np.array(self.types, dtype=float)


@dataclass(frozen=True)
class ReportProfile:
    reports: tuple[Report, ...]

    def __post_init__(self):
        vals = []
        for r in self.reports:
            if r is EMPTY or r is None:
                vals.append(EMPTY)
                continue
            r = float(r)
            if r < 0 or math.isnan(r):
                raise ValueError(f"reports must be nonnegative or EMPTY: {self.reports}")
            vals.append(r)
        object.__setattr__(self, "reports", tuple(vals))

    @property
    def n(self) -> int:
        return len(self.reports)

    @classmethod
    def truthful(cls, types: TypeProfile | Sequence[float]) -> "ReportProfile":
        ts = types.types if isinstance(types, TypeProfile) else types
        return cls(tuple(ts))

    def check_against(self, types: TypeProfile) -> None:
        """Enforce that nobody reports more than their true type."""
        if types.n != self.n:
            raise ValueError(f"{self.n} reports for {types.n} agents")
        for i, (r, t) in enumerate(zip(self.reports, types.types)):
            if r is not EMPTY and r > t * (1 + 1e-12) + 1e-15:
                raise ValueError(f"agent {i} reports {r} above true type {t}")

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        present = np.array([r is not EMPTY for r in self.reports])
        values = np.array([0.0 if r is EMPTY else r for r in self.reports])
        return values, present


def as_batch(reports) -> tuple[np.ndarray, np.ndarray]:
    """Normalize a ReportProfile / sequence / ``(values, present)`` pair."""
    if isinstance(reports, tuple) and len(reports) == 2 and isinstance(reports[0], np.ndarray):
        return reports
    if not isinstance(reports, ReportProfile):
        reports = ReportProfile(tuple(reports))
    return reports.as_arrays()


@dataclass(frozen=True)
class GridSpec:
    """Discretized type space {0, step, 2 step, ..., upper}."""

    upper: float
    step: float
    include_empty: bool = False

    def __post_init__(self):
        if not (self.upper > 0 and self.step > 0):
            raise ValueError("grid bounds must be positive")
        ratio = self.upper / self.step
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ValueError(f"upper/step = {ratio} is not a positive integer")

    @property
    def size(self) -> int:
        """Number of numeric grid points (EMPTY excluded)."""
        return int(round(self.upper / self.step)) + 1

    @property
    def disparity(self) -> int:
        return self.size - 1

    def values(self) -> np.ndarray:
        return np.arange(self.size) * self.step

    def points(self) -> list[Report]:
        pts: list[Report] = [float(v) for v in self.values()]
        return [EMPTY] + pts if self.include_empty else pts

    def index(self, t) -> np.ndarray:
        """Grid index of data size(s) ``t`` (nearest multiple of the step)."""
        return np.rint(np.asarray(t, dtype=float) / self.step).astype(int)

    def to_dict(self) -> dict:
        return {"upper": self.upper, "step": self.step, "include_empty": self.include_empty}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(float(d["upper"]), float(d["step"]), bool(d.get("include_empty", False)))


def grid_points(g: GridSpec) -> list[Report]:
    return g.points()


@dataclass(frozen=True)
class Outcome:
    allocation: np.ndarray
    payments: np.ndarray
    effective_qualities: np.ndarray
    values: np.ndarray
    utilities: np.ndarray

    @property
    def revenue(self) -> float:
        return float(np.sum(self.payments))

    @property
    def welfare(self) -> float:
        return float(np.sum(self.values))
