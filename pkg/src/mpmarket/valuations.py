"""Valuation families over the vector of deployed model qualities.

Every model maps a quality array of shape ``(..., n)`` to a value array of the
same shape. ``gradient`` returns the Jacobian with shape ``(..., n, n)`` where
entry ``[..., i, j]`` is the partial of v_i with respect to q_j.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import GridSpec


class ValuationModel:
    n: int | None = None
    label = "valuation"

    def value(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, q: np.ndarray, h: float = 1e-6) -> np.ndarray:
        """Jacobian by central differences; subclasses override when analytic."""
        q = np.asarray(q, dtype=float)
        n = q.shape[-1]
        jac = np.empty(q.shape + (n,))
        for j in range(n):
            up, dn = q.copy(), q.copy()
            up[..., j] += h
            dn[..., j] = np.maximum(dn[..., j] - h, 0.0)
            width = (up[..., j] - dn[..., j])[..., None]
            jac[..., :, j] = (self.value(up) - self.value(dn)) / width
        return jac

    def __call__(self, q) -> np.ndarray:
        return self.value(np.asarray(q, dtype=float))


@dataclass(frozen=True, eq=False)
class LinearExternalityModel(ValuationModel):
    """v_i = sum_j alpha[i, j] * q_j.

    ``strict`` enforces a positive diagonal (own quality always helps).
    """

    alpha: np.ndarray
    strict: bool = False
    label = "linear"

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"alpha must be square, got shape {a.shape}")
        if self.strict and np.any(np.diag(a) <= 0):
            raise ValueError("strict linear model needs a positive diagonal")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    def value(self, q):
        return q @ self.alpha.T

    def gradient(self, q, h=1e-6):
        q = np.asarray(q)
        return np.broadcast_to(self.alpha, q.shape + (self.n,))


@dataclass(frozen=True, eq=False)
class QuasiMonotoneModel(ValuationModel):
    """v_i = F_i(q_i) + theta_i(q_{-i}).

    ``F[i]`` takes an array of own qualities; ``theta[i]`` takes an array of
    shape ``(..., n-1)`` holding the other agents' qualities in index order.
    """

    F: tuple[Callable[[np.ndarray], np.ndarray], ...]
    theta: tuple[Callable[[np.ndarray], np.ndarray], ...]
    label = "quasi-monotone"

    def __post_init__(self):
        if len(self.F) != len(self.theta):
            raise ValueError("F and theta need one entry per agent")
        object.__setattr__(self, "F", tuple(self.F))
        object.__setattr__(self, "theta", tuple(self.theta))

    @property
    def n(self) -> int:
        return len(self.F)

    def value(self, q):
        q = np.asarray(q, dtype=float)
        out = np.empty_like(q)
        idx = np.arange(self.n)
        for i in range(self.n):
            out[..., i] = self.F[i](q[..., i]) + self.theta[i](q[..., idx != i])
        return out

    def check_monotone(self, rng: np.random.Generator, pairs: int = 1000) -> None:
        a, b = rng.uniform(0, 1, pairs), rng.uniform(0, 1, pairs)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keep = hi > lo
        for i, f in enumerate(self.F):
            if np.any(f(hi[keep]) <= f(lo[keep])):
                raise AssertionError(f"F_{i} is not strictly increasing")


@dataclass(frozen=True, eq=False)
class PowerMarketModel(ValuationModel):
    """v_i = (sum_j q_j) ** growth * q_i; market size is (sum q) ** (growth + 1).

    A zero-quality market is worth zero to everyone, for every exponent.
    """

    growth: float
    n: int | None = None
    label = "power-market"

    def value(self, q):
        q = np.asarray(q, dtype=float)
        total = q.sum(axis=-1, keepdims=True)
        pos = total > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(pos, np.power(np.where(pos, total, 1.0), self.growth), 0.0)
        return scale * q

    def gradient(self, q, h=1e-6):
        q = np.asarray(q, dtype=float)
        n = q.shape[-1]
        total = q.sum(axis=-1)[..., None, None]
        pos = total > 0
        safe = np.where(pos, total, 1.0)
        a = self.growth
        jac = a * safe ** (a - 1) * q[..., :, None] + np.eye(n) * safe ** a
        return np.where(pos, jac, 0.0)


@dataclass(frozen=True, eq=False)
class ProportionalFixedMarketModel(ValuationModel):
    """v_i = q_i / sum_j q_j: a unit market split by relative quality."""

    n: int | None = None
    label = "proportional"

    def value(self, q):
        q = np.asarray(q, dtype=float)
        total = q.sum(axis=-1, keepdims=True)
        pos = total > 0
        return np.where(pos, q / np.where(pos, total, 1.0), 0.0)

    def gradient(self, q, h=1e-6):
        q = np.asarray(q, dtype=float)
        n = q.shape[-1]
        total = q.sum(axis=-1)[..., None, None]
        pos = total > 0
        safe = np.where(pos, total, 1.0)
        jac = (np.eye(n) * safe - q[..., :, None]) / safe ** 2
        return np.where(pos, jac, 0.0)


def value(model: ValuationModel, q) -> np.ndarray:
    return model.value(np.asarray(q, dtype=float))


def market_size(model: ValuationModel, q) -> np.ndarray | float:
    total = model.value(np.asarray(q, dtype=float)).sum(axis=-1)
    return float(total) if np.ndim(total) == 0 else total


@dataclass(frozen=True)
class CompetitionWitness:
    agent: int
    other: int
    point: tuple[float, ...]
    derivative: float


def is_non_competitive(model: ValuationModel, probe_grid: GridSpec, tol: float = 1e-9,
                       n: int | None = None, step: float = 1e-4
                       ) -> tuple[bool, CompetitionWitness | None]:
    """Probe every cross-partial dv_i/dq_j on ``probe_grid ** n``.

    Central differences inside the grid, one-sided at its edges. Returns
    ``(True, None)`` or ``(False, witness)`` with 0-based agent indices.
    """
    n = n or model.n
    if n is None:
        raise ValueError("agent count is required for this model")
    pts = probe_grid.values()
    lo, hi = pts[0], pts[-1]
    q = np.array(list(itertools.product(pts, repeat=n)))
    for j in range(n):
        up, dn = q.copy(), q.copy()
        up[:, j] = np.minimum(up[:, j] + step, hi)
        dn[:, j] = np.maximum(dn[:, j] - step, lo)
        deriv = (model.value(up) - model.value(dn)) / (up[:, j] - dn[:, j])[:, None]
        bad = deriv < -tol
        if np.any(bad):
            row, i = map(int, np.argwhere(bad)[0])
            return False, CompetitionWitness(i, j, tuple(map(float, q[row])), float(deriv[row, i]))
    return True, None


def random_quasi_monotone(n: int, rng: np.random.Generator) -> QuasiMonotoneModel:
    """Smooth quasi-monotone instance: quadratic increasing F, trigonometric theta."""
    Fs, thetas = [], []
    for _ in range(n):
        a = rng.uniform(0.5, 1.5)
        b = rng.uniform(-a / 2, a / 2)  # keeps F' = a + 2 b q > 0 on [0, 1]
        c = rng.uniform(-1, 1, n - 1)
        d = rng.uniform(-0.5, 0.5)
        Fs.append(lambda q, a=a, b=b: a * q + b * q * q)
        thetas.append(lambda qo, c=c, d=d: qo @ c + d * np.sin(3.0 * qo.sum(axis=-1)))
    return QuasiMonotoneModel(tuple(Fs), tuple(thetas))


def build_model(spec: dict) -> ValuationModel:
    """Construct a valuation family from ``{"family": name, ...params}``."""
    params = dict(spec)
    family = params.pop("family")
    if family == "linear":
        return LinearExternalityModel(np.array(params.pop("alpha"), dtype=float),
                                      strict=bool(params.pop("strict", False)), **params)
    if family == "power-market":
        return PowerMarketModel(float(params.pop("growth")), n=params.pop("n", None), **params)
    if family == "proportional":
        return ProportionalFixedMarketModel(n=params.pop("n", None), **params)
    raise KeyError(f"unknown valuation family {family!r}")


VALUATION_FAMILIES = ("linear", "power-market", "proportional")
