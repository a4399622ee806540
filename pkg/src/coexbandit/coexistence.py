"""Analytic LTE/WiFi proportional-fairness model under CSAT duty cycling.

All durations are in seconds and all rates in bits/second. The control
variable of the learner is ``ztilde = log(toff_bar - c1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .learner import DecisionInterval, project

DEFAULT_INTERVAL = DecisionInterval(-6.9, 0.0)


@dataclass(frozen=True)
class MacParams:
    """Slotted WiFi MAC/PHY and LTE parameter pack.

    These defaults are illustrative 802.11ac-like values, not a reproduction
    of any published parameter table.
    """

    tau: float = 1.0 / 16.0  # per-slot transmit probability
    sigma: float = 9e-6  # idle slot
    phy_rate: float = 65e6  # payload bits/second
    overhead: float = 100e-6  # PHY/MAC overhead per aggregate
    packets: int = 5  # packets per aggregate
    packet_bytes: int = 1500
    gamma: float = 1e-3  # LTE subframe
    lte_rate: float = 75e6
    t_on: float = 0.05
    p_txa: float | None = None  # None: 1 - (1 - tau)^n

    @property
    def l_agg(self) -> float:
        return float(self.packets * self.packet_bytes * 8)

    @property
    def t_fra(self) -> float:
        return self.l_agg / self.phy_rate + self.overhead

    def collision_probability(self, n: int) -> float:
        if self.p_txa is not None:
            return self.p_txa
        return 1.0 - (1.0 - self.tau) ** n


@dataclass(frozen=True)
class CoexistenceParams:
    n: int
    t_on: float
    r: float
    s: tuple[float, ...]
    t_fra: float = 0.0
    p_txa: float = 0.0
    gamma: float = 1e-3
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if len(self.s) != self.n:
            raise ValueError(f"expected {self.n} baseline rates, got {len(self.s)}")
        if any(sj <= 0 for sj in self.s):
            raise ValueError("baseline WiFi rates must be positive")
        if self.r <= 0:
            raise ValueError("LTE rate must be positive")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("airtime corrections must be nonnegative")
        if not self.t_on > self.c2:
            raise ValueError(f"t_on ({self.t_on}) must exceed c2 ({self.c2})")

    @classmethod
    def derive(cls, n, t_on, r, s, t_fra, p_txa, gamma):
        """Build parameters with c1, c2 computed from the frame/subframe model."""
        c1, c2 = airtime_corrections(t_fra, p_txa, gamma)
        if np.isscalar(s):
            s = (float(s),) * n
        return cls(n=n, t_on=t_on, r=r, s=tuple(float(x) for x in s), t_fra=t_fra,
                   p_txa=p_txa, gamma=gamma, c1=c1, c2=c2)

    @classmethod
    def from_mac(cls, n: int, mac: MacParams | None = None) -> "CoexistenceParams":
        mac = mac or MacParams()
        sj = wifi_baseline_rate(mac.tau, mac.sigma, mac.t_fra, mac.t_fra, mac.l_agg, n)
        return cls.derive(n, mac.t_on, mac.lte_rate, sj, mac.t_fra,
                          mac.collision_probability(n), mac.gamma)

    def scaled(self, factor: float) -> "CoexistenceParams":
        return replace(self, r=self.r * factor, s=tuple(x * factor for x in self.s))

    @property
    def log_const(self) -> float:
        """The z-independent part of the cost."""
        return -math.log(self.r * (self.t_on - self.c2)) - sum(math.log(x) for x in self.s)


def airtime_corrections(t_fra: float, p_txa: float, gamma: float) -> tuple[float, float]:
    """Expected airtime lost to partial LTE/WiFi collisions.

    Returns ``(c1, c2)``: WiFi loses on average half a frame, LTE loses the
    whole subframes overlapped by that half frame.
    """
    if t_fra <= 0 or gamma <= 0:
        raise ValueError("t_fra and gamma must be positive")
    if not 0.0 <= p_txa <= 1.0:
        raise ValueError(f"p_txa must lie in [0, 1], got {p_txa}")
    c1 = t_fra / 2.0 * p_txa
    c2 = math.ceil(t_fra / (2.0 * gamma)) * gamma * p_txa
    return c1, c2


def wifi_baseline_rate(tau, sigma, t_s, t_c, l_agg, n) -> float:
    """Per-station saturation throughput of n stations with constant per-slot tau."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if n < 1:
        raise ValueError("n must be >= 1")
    p_idle = (1.0 - tau) ** n
    p_succ_j = tau * (1.0 - tau) ** (n - 1)
    p_succ = n * p_succ_j
    p_coll = max(1.0 - p_idle - p_succ, 0.0)
    return p_succ_j * l_agg / (p_idle * sigma + p_succ * t_s + p_coll * t_c)


def toff_to_ztilde(toff_bar, c1):
    toff_bar = np.asarray(toff_bar, dtype=float)
    if np.any(toff_bar <= c1):
        raise ValueError(f"mean off time must exceed c1={c1}")
    out = np.log(toff_bar - c1)
    return float(out) if out.ndim == 0 else out


def ztilde_to_toff(ztilde, c1):
    out = np.exp(np.asarray(ztilde, dtype=float)) + c1
    return float(out) if out.ndim == 0 else out


def wifi_throughput(params: CoexistenceParams, toff_bar, j: int = 0):
    toff_bar = np.asarray(toff_bar, dtype=float)
    if np.any(toff_bar < params.c1):
        raise ValueError(f"mean off time below c1={params.c1} leaves negative WiFi airtime")
    out = params.s[j] * (toff_bar - params.c1) / (params.t_on + toff_bar)
    return float(out) if out.ndim == 0 else out


def lte_throughput(params: CoexistenceParams, toff_bar):
    toff_bar = np.asarray(toff_bar, dtype=float)
    if np.any(toff_bar < 0):
        raise ValueError("mean off time must be nonnegative")
    out = params.r * (params.t_on - params.c2) / (params.t_on + toff_bar)
    return float(out) if out.ndim == 0 else out


def mean_wifi_throughput(params: CoexistenceParams, toff_bar):
    return sum(wifi_throughput(params, toff_bar, j) for j in range(params.n)) / params.n


def _log_denominator(params, ztilde):
    # log(t_on + c1 + e^z) without overflow for large z
    return np.logaddexp(math.log(params.t_on + params.c1), ztilde)


def cost(params: CoexistenceParams, ztilde):
    """Negative proportional-fair utility as a function of log effective off time."""
    z = np.asarray(ztilde, dtype=float)
    out = params.log_const + (params.n + 1) * _log_denominator(params, z) - params.n * z
    return float(out) if out.ndim == 0 else out


def cost_from_throughputs(params: CoexistenceParams, ztilde: float) -> float:
    """Same objective assembled from the throughput formulas; used to cross-check `cost`."""
    toff = ztilde_to_toff(ztilde, params.c1)
    total = -math.log(lte_throughput(params, toff))
    for j in range(params.n):
        total -= math.log(wifi_throughput(params, toff, j))
    return total


def analytic_gradient(params: CoexistenceParams, ztilde):
    z = np.asarray(ztilde, dtype=float)
    # e^z / (a + e^z) written as a logistic to stay finite for large |z|
    share = 1.0 / (1.0 + np.exp(math.log(params.t_on + params.c1) - z))
    out = (params.n + 1) * share - params.n
    return float(out) if out.ndim == 0 else out


def unconstrained_optimum(params: CoexistenceParams) -> float:
    return math.log(params.n * (params.t_on + params.c1))


def optimal_ztilde(params: CoexistenceParams, interval: DecisionInterval = DEFAULT_INTERVAL) -> float:
    """Minimiser of `cost` over the interval (root of the gradient, clamped)."""
    return project(interval, 0.0, unconstrained_optimum(params))


@dataclass(frozen=True)
class Optimum:
    ztilde: float
    toff: float
    s_lte: float
    s_wifi_mean: float
    cost: float


def optimum(params: CoexistenceParams, interval: DecisionInterval = DEFAULT_INTERVAL) -> Optimum:
    z = optimal_ztilde(params, interval)
    toff = ztilde_to_toff(z, params.c1)
    return Optimum(z, toff, lte_throughput(params, toff), mean_wifi_throughput(params, toff),
                   cost(params, z))


@dataclass
class ParamCache:
    """Memoises `CoexistenceParams.from_mac` per station count."""

    mac: MacParams = field(default_factory=MacParams)
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, n: int) -> CoexistenceParams:
        if n not in self._cache:
            self._cache[n] = CoexistenceParams.from_mac(n, self.mac)
        return self._cache[n]
