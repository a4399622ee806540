"""Online gradient descent with sequential two-round gradient estimates.

The learner is a query/observe state machine. Each outer iteration ``k``
spans two rounds: the first plays ``y_k + eps_k * delta_k``, the second
``y_k - eps_k * delta_k``, and the difference of the two observed costs
drives a projected gradient step::

    learner = OGDSeMP(DecisionInterval(-6.9, 0.0), seed=1)
    for _ in range(200):
        t, x = learner.next_query()
        report = learner.observe(f(x))
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class ProtocolError(RuntimeError):
    """Raised when next_query/observe calls are not interleaved."""


@dataclass(frozen=True)
class DecisionInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"empty interval [{self.lower}, {self.upper}]")

    @property
    def diameter(self) -> float:
        return self.upper - self.lower

    def shrink(self, alpha: float) -> tuple[float, float]:
        if alpha < 0:
            raise ValueError("shrink amount must be nonnegative")
        if alpha > self.diameter / 2:
            raise ValueError(f"shrinking by {alpha} empties an interval of diameter {self.diameter}")
        return self.lower + alpha, self.upper - alpha

    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def grid(self, points: int) -> np.ndarray:
        return np.linspace(self.lower, self.upper, points)


def project(interval: DecisionInterval, alpha: float, x: float) -> float:
    """Clamp x into the shrunken interval [A + alpha, B - alpha]."""
    lo, hi = interval.shrink(alpha)
    return max(min(hi, x), lo)


def gradient_estimate(gplus: float, gminus: float, eps: int, delta: float) -> float:
    if delta <= 0:
        raise ValueError("delta must be positive")
    return (gplus - gminus) / (2.0 * eps * delta)


@dataclass(frozen=True)
class PowerSchedule:
    """``scale / (k + 1) ** exponent``, or ``scale`` for every k when constant."""

    scale: float
    exponent: float = 0.5
    constant: bool = False

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("schedule scale must be positive")
        if self.exponent < 0:
            raise ValueError("schedule exponent must be nonnegative (non-increasing schedule)")

    def __call__(self, k: int) -> float:
        if self.constant:
            return self.scale
        return self.scale / (k + 1) ** self.exponent


def exploration_schedule(omega: float, exponent: float = 0.75, constant: bool = False) -> PowerSchedule:
    return PowerSchedule(omega, exponent, constant)


def step_schedule(eta: float = 1.0, exponent: float = 0.5, constant: bool = False) -> PowerSchedule:
    return PowerSchedule(eta, exponent, constant)


class Phase(enum.Enum):
    AWAIT_PLUS = "await_plus"
    AWAIT_MINUS = "await_minus"


@dataclass(frozen=True)
class StepReport:
    k: int
    gradient: float  # gradient actually applied
    raw_gradient: float  # estimate before truncation
    truncated: bool
    y: float  # center after the update
    y_prev: float
    eps: int
    delta: float
    eta: float
    gplus: float
    gminus: float


class OGDSeMP:
    """Bandit learner on a 1-D interval.

    Args:
        interval: decision set.
        exploration: ``delta_k`` schedule; ``delta_0`` must not exceed half the diameter.
        step: ``eta_k`` schedule.
        seed: seed or ``numpy.random.Generator`` for the sign draws.
        y0: initial center, defaults to the midpoint.
        lipschitz: known gradient bound G; enables truncation at ``truncation_factor * G``.
        truncation_factor: multiplier for the truncation threshold. When neither G nor an
            absolute threshold is given, the threshold is this multiple of the last
            applied gradient's magnitude.
        truncation_threshold: absolute threshold, overrides the two rules above.
        truncate: disable truncation entirely when False.
    """

    def __init__(
        self,
        interval: DecisionInterval,
        exploration: PowerSchedule | None = None,
        step: PowerSchedule | None = None,
        seed=None,
        y0: float | None = None,
        lipschitz: float | None = None,
        truncation_factor: float = 10.0,
        truncation_threshold: float | None = None,
        truncate: bool = True,
    ):
        self.interval = interval
        self.exploration = exploration or exploration_schedule(0.01)
        self.step = step or step_schedule()
        if self.exploration(0) > interval.diameter / 2:
            raise ValueError(
                f"delta_0={self.exploration(0)} exceeds half the interval diameter {interval.diameter / 2}"
            )
        if truncation_factor <= 0:
            raise ValueError("truncation_factor must be positive")
        self.lipschitz = lipschitz
        self.truncation_factor = truncation_factor
        self.truncation_threshold = truncation_threshold
        self.truncate = truncate
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

        lo, hi = interval.shrink(self.exploration(0))
        if y0 is None:
            y0 = interval.midpoint()
        elif not lo <= y0 <= hi:
            raise ValueError(f"y0={y0} outside the initial feasible set [{lo}, {hi}]")
        self.y = float(y0)
        self.k = 0
        self.t = 0  # rounds completed
        self.phase = Phase.AWAIT_PLUS
        self.pending = False
        self.gplus = math.nan
        self.g_prev: float | None = None
        self.eps = self._draw_sign()

    def _draw_sign(self) -> int:
        return 1 if self.rng.integers(0, 2) else -1

    @property
    def delta(self) -> float:
        return self.exploration(self.k)

    @property
    def eta(self) -> float:
        return self.step(self.k)

    def threshold(self) -> float | None:
        if not self.truncate:
            return None
        if self.truncation_threshold is not None:
            return self.truncation_threshold
        if self.lipschitz is not None:
            return self.truncation_factor * self.lipschitz
        if self.g_prev is not None:
            return self.truncation_factor * abs(self.g_prev)
        return None

    def next_query(self) -> tuple[int, float]:
        """Return ``(round, point)`` for the next cost evaluation (rounds are 1-based)."""
        if self.pending:
            raise ProtocolError("next_query called twice without observe")
        self.pending = True
        sign = self.eps if self.phase is Phase.AWAIT_PLUS else -self.eps
        return self.t + 1, self.y + sign * self.delta

    def observe(self, cost: float) -> StepReport | None:
        if not self.pending:
            raise ProtocolError("observe called without a pending query")
        self.pending = False
        self.t += 1
        if self.phase is Phase.AWAIT_PLUS:
            self.gplus = float(cost)
            self.phase = Phase.AWAIT_MINUS
            return None

        delta, eta = self.delta, self.eta
        raw = gradient_estimate(self.gplus, float(cost), self.eps, delta)
        g, truncated = raw, False
        limit = self.threshold()
        if limit is not None and abs(raw) > limit:
            # with no history, skip the step rather than move on a bogus estimate
            g = self.g_prev if self.g_prev is not None else 0.0
            truncated = True
        y_prev = self.y
        self.y = project(self.interval, delta, y_prev - eta * g)
        report = StepReport(self.k, g, raw, truncated, self.y, y_prev, self.eps, delta, eta,
                            self.gplus, float(cost))
        self.g_prev = g
        self.k += 1
        self.phase = Phase.AWAIT_PLUS
        self.eps = self._draw_sign()
        return report
