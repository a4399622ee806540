"""Loss sequences, regret bookkeeping and the theoretical regret bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .learner import DecisionInterval

DEFAULT_GRID = 10_000
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(eq=False)
class LossFunction:
    """A convex cost on the decision interval.

    ``fn`` must accept numpy arrays. ``lipschitz`` (G) and ``bound`` (C) are
    declared constants; `check` spot-tests them together with convexity.
    """

    fn: Callable
    grad: Callable | None = None
    lipschitz: float | None = None
    bound: float | None = None
    name: str = ""

    def __call__(self, x):
        return self.fn(x)

    def check(self, interval: DecisionInterval, samples: int = 1000, seed=0, bounded=False):
        rng = np.random.default_rng(seed)
        a = rng.uniform(interval.lower, interval.upper, samples)
        b = rng.uniform(interval.lower, interval.upper, samples)
        fa, fb = self(a), self(b)
        if np.any(self(0.5 * (a + b)) > 0.5 * (fa + fb) + 1e-9):
            raise ValueError(f"{self.name or 'loss'} fails the midpoint convexity test")
        if self.lipschitz is not None and np.any(np.abs(fa - fb) > self.lipschitz * np.abs(a - b) + 1e-9):
            raise ValueError(f"{self.name or 'loss'} exceeds its declared Lipschitz constant")
        if bounded and self.bound is not None and (np.any(fa < 0) or np.any(fa > self.bound)):
            raise ValueError(f"{self.name or 'loss'} leaves [0, {self.bound}]")


def constant_loss(value: float) -> LossFunction:
    return LossFunction(lambda x: np.full_like(np.asarray(x, dtype=float), value), lambda x: 0.0 * x,
                        lipschitz=0.0, name=f"const({value})")


def quadratic_loss(center: float, scale: float = 1.0, offset: float = 0.0) -> LossFunction:
    return LossFunction(lambda x: scale * (np.asarray(x) - center) ** 2 + offset,
                        lambda x: 2 * scale * (np.asarray(x) - center), name=f"quad({center})")


def measured_lipschitz(losses, interval: DecisionInterval, points: int = DEFAULT_GRID) -> float:
    xs = interval.grid(points)
    return max(float(np.max(np.abs(np.diff(f(xs))) / np.diff(xs))) for f in losses)


def measured_range(losses, interval: DecisionInterval, points: int = DEFAULT_GRID) -> float:
    """max - min of the losses over the interval (the empirical C)."""
    xs = interval.grid(points)
    vals = np.concatenate([np.asarray(f(xs), dtype=float) for f in losses])
    return float(vals.max() - vals.min())


class LossSequence:
    """Base class: ``loss(t)`` for 1-based rounds ``t <= horizon``."""

    horizon: int

    def loss(self, t: int) -> LossFunction:
        raise NotImplementedError

    def window(self, s: int, r: int) -> list[LossFunction]:
        return [self.loss(t) for t in range(s, r + 1)]

    def distinct(self) -> list[LossFunction]:
        seen = {}
        for t in range(1, self.horizon + 1):
            f = self.loss(t)
            seen.setdefault(id(f), f)
        return list(seen.values())


@dataclass
class FixedSequence(LossSequence):
    f: LossFunction
    horizon: int

    def loss(self, t):
        _check_round(t, self.horizon)
        return self.f


@dataclass
class PiecewiseSequence(LossSequence):
    """``f_t = functions[i]`` for ``starts[i] <= t < starts[i+1]``.

    ``starts[0]`` must be 1; strictly increasing starts make the index map
    nondecreasing with range ``1..N``.
    """

    functions: Sequence[LossFunction]
    starts: Sequence[int]
    horizon: int

    def __post_init__(self):
        if len(self.functions) != len(self.starts) or not self.functions:
            raise ValueError("need one start round per function")
        if self.starts[0] != 1:
            raise ValueError("the first piece must start at round 1")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("piece starts must be strictly increasing")
        if self.starts[-1] > self.horizon:
            raise ValueError("piece starts beyond the horizon")

    @property
    def switches(self) -> int:
        return len(self.starts) - 1

    def index(self, t: int) -> int:
        _check_round(t, self.horizon)
        return int(np.searchsorted(self.starts, t, side="right")) - 1

    def loss(self, t):
        return self.functions[self.index(t)]


@dataclass
class DriftSequence(LossSequence):
    """Base loss translated by a slowly moving location ``shifts[t-1]``.

    With a G-Lipschitz base and per-round location moves of at most alpha/G,
    consecutive losses differ by at most alpha in sup norm.
    """

    base: LossFunction
    shifts: np.ndarray
    alpha: float
    _losses: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.shifts = np.asarray(self.shifts, dtype=float)
        base = self.base
        self._losses = [
            LossFunction(lambda x, u=u: base(np.asarray(x) - u), lipschitz=base.lipschitz, name=f"drift({u:.4g})")
            for u in self.shifts
        ]

    @property
    def horizon(self) -> int:
        return len(self.shifts)

    @classmethod
    def random_walk(cls, base: LossFunction, alpha: float, horizon: int, seed=None, start: float = 0.0):
        if not base.lipschitz:
            raise ValueError("random_walk drift needs a base loss with a declared Lipschitz constant")
        rng = np.random.default_rng(seed)
        steps = rng.uniform(-1.0, 1.0, horizon) * alpha / base.lipschitz
        steps[0] = 0.0
        return cls(base, start + np.cumsum(steps), alpha)

    def loss(self, t):
        _check_round(t, self.horizon)
        return self._losses[t - 1]


class CustomSequence(LossSequence):
    """Sequence filled in round by round by an external driver."""

    def __init__(self):
        self._losses: list[LossFunction] = []

    @property
    def horizon(self) -> int:
        return len(self._losses)

    def append(self, f: LossFunction):
        self._losses.append(f)

    def loss(self, t):
        _check_round(t, self.horizon)
        return self._losses[t - 1]


def _check_round(t, horizon):
    if not 1 <= t <= horizon:
        raise IndexError(f"round {t} outside 1..{horizon}")


def instantaneous_deviation(f_a, f_b, interval: DecisionInterval, grid_points: int = DEFAULT_GRID,
                            extra_points=None) -> float:
    """Grid estimate of ``sup_x |f_a(x) - f_b(x)|`` (a lower bound on the true sup)."""
    if grid_points < 2:
        raise ValueError("need at least 2 grid points")
    if f_a is f_b:
        return 0.0
    xs = interval.grid(grid_points)
    if extra_points is not None:
        xs = np.concatenate([xs, np.atleast_1d(np.asarray(extra_points, dtype=float))])
    return float(np.max(np.abs(np.asarray(f_a(xs)) - np.asarray(f_b(xs)))))


def total_deviation(sequence: LossSequence, s: int, r: int, interval: DecisionInterval,
                    grid_points: int = DEFAULT_GRID) -> float:
    """Sum of squared deviations over the round pairs starting at odd rounds s..r."""
    if s % 2 == 0 or r % 2 == 0:
        raise ValueError(f"interval endpoints must be odd rounds, got [{s}, {r}]")
    if r < s:
        raise ValueError(f"reversed interval [{s}, {r}]")
    cache: dict = {}
    total = 0.0
    for k in range((s - 1) // 2, (r - 1) // 2 + 1):
        fa, fb = sequence.loss(2 * k + 1), sequence.loss(2 * k + 2)
        key = (id(fa), id(fb))
        if key not in cache:
            cache[key] = instantaneous_deviation(fa, fb, interval, grid_points)
        total += cache[key] ** 2
    return total


def golden_section(f, a: float, b: float, tol: float = 1e-8, max_iter: int = 500) -> tuple[float, float]:
    """Minimise a unimodal scalar function on [a, b]; returns ``(x, f(x))``.

    Endpoints are compared at the end so monotone functions return the boundary.
    """
    lo, hi = a, b
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
    best = min([(f1, x1), (f2, x2), (f(a), a), (f(b), b)], key=lambda p: p[0])
    return best[1], best[0]


def _multiplicities(losses) -> dict:
    counts: dict = {}
    for f in losses:
        entry = counts.setdefault(id(f), [f, 0])
        entry[1] += 1
    return counts


def _weighted_sum(counts: dict):
    items = list(counts.values())
    return lambda x: sum(c * float(f(x)) for f, c in items)


def best_fixed_point(losses, interval: DecisionInterval, tol: float = 1e-8) -> tuple[float, float]:
    """``argmin_x sum_t f_t(x)`` over the interval, and the minimal total cost.

    Identical loss objects are evaluated once and weighted by multiplicity.
    """
    if isinstance(losses, LossSequence):
        losses = losses.window(1, losses.horizon)
    total = _weighted_sum(_multiplicities(losses))
    return golden_section(total, interval.lower, interval.upper, tol)


class RegretLedger:
    """Append-only per-round record of plays, incurred costs and the losses behind them."""

    def __init__(self):
        self.rounds: list[int] = []
        self.points: list[float] = []
        self.costs: list[float] = []
        self.losses: list[LossFunction] = []
        self._counts: dict = {}

    def __len__(self):
        return len(self.rounds)

    def record(self, t: int, x: float, loss: LossFunction, cost: float | None = None):
        if self.rounds and t <= self.rounds[-1]:
            raise ValueError(f"round {t} does not follow round {self.rounds[-1]}")
        self.rounds.append(t)
        self.points.append(float(x))
        self.costs.append(float(loss(x)) if cost is None else float(cost))
        self.losses.append(loss)
        self._counts.setdefault(id(loss), [loss, 0])[1] += 1

    def cumulative_regret(self, interval: DecisionInterval, tol: float = 1e-8) -> float:
        """Regret over every recorded round, without regrouping the losses."""
        _, best = golden_section(_weighted_sum(self._counts), interval.lower, interval.upper, tol)
        return math.fsum(self.costs) - best

    def _slice(self, s, r):
        i = int(np.searchsorted(self.rounds, s, side="left"))
        j = int(np.searchsorted(self.rounds, r, side="right"))
        if i >= j or self.rounds[i] != s or self.rounds[j - 1] != r:
            raise ValueError(f"ledger does not cover rounds [{s}, {r}]")
        return i, j


def regret(ledger: RegretLedger, s: int, r: int, interval: DecisionInterval, tol: float = 1e-8) -> float:
    i, j = ledger._slice(s, r)
    _, best = best_fixed_point(ledger.losses[i:j], interval, tol)
    return math.fsum(ledger.costs[i:j]) - best


def theorem1_bound(D: float, G: float, eta: float, delta: float, Delta: float, L: float) -> float:
    """Expected interval-regret bound for constant step size and exploration radius."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if not 0 < delta < D / 2:
        raise ValueError(f"delta must lie in (0, D/2) = (0, {D / 2}), got {delta}")
    return 2 * D**2 / eta + eta * G**2 * Delta + eta * L / (4 * delta**2) + 4 * delta * G * Delta


@dataclass(frozen=True)
class TunedBound:
    eta: float
    delta: float
    bound: float


def corollary_bound(which: str, T: int, D: float, G: float, C: float, N: int = 0,
                    alpha: float = 0.0) -> TunedBound:
    """Prescribed constant (eta, delta) and the resulting regret bound.

    ``which`` is one of ``general``, ``switching_total``, ``switching_interval``, ``slow``.
    """
    if T < 2:
        raise ValueError("T must be at least 2")
    if which == "general":
        eta, delta = G / (D * T**0.75), C * T**-0.25
        bound = (2 * G * D + 4 * G * C + G / (4 * D)) * T**0.75 + G * D * T**0.25
    elif which in ("switching_total", "switching_interval"):
        eta, delta = G / (D * math.sqrt(T)), C * math.log(T) / T
        if which == "switching_total":
            bound = (N / 2 + 3) * G * D * math.sqrt(T) + 4 * C * G * math.log(T)
        else:
            bound = 3 * G * D * math.sqrt(T) + 4 * C * G * math.log(T) + 2 * C
    elif which == "slow":
        eta, delta = G / (D * T**0.75), alpha * T**-0.25
        bound = (2 * G * D + 4 * G * alpha + G / (4 * D)) * T**0.75 + G * D * T**0.25
    else:
        raise ValueError(f"unknown regime {which!r}")
    return TunedBound(eta, delta, bound)
