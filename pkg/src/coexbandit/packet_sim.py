"""Slotted simulator of CSAT LTE duty cycling next to saturated WiFi stations.

A batch is a sequence of LTE cycles, each an off-period followed by a fixed
on-period. During an off-period the WiFi channel evolves slot by slot: every
station transmits with probability ``tau``; an idle slot lasts ``sigma`` and a
busy slot (success or collision) lasts ``t_fra``. LTE transmits obliviously
when its on-period starts. A WiFi frame still in the air at that instant is
lost, and LTE loses the ``ceil(overlap / gamma)`` subframes it overlaps.

Because slots are i.i.d., the contention process is drawn as one long stream
of "idle run + busy slot" cycles, and each off-period consumes a contiguous
block of it, restarting with a fresh cycle after every LTE on-period.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .coexistence import CoexistenceParams, MacParams


class BatchTooShort(ValueError):
    """A batch measured zero throughput for some party, so its log-cost is undefined."""


@dataclass(frozen=True)
class SimConfig:
    n: int = 10
    tau: float = 1.0 / 16.0
    sigma: float = 9e-6
    t_fra: float = MacParams().t_fra
    l_agg: float = MacParams().l_agg
    t_on: float = 0.05
    gamma: float = 1e-3
    r: float = 75e6
    t_b: float = 50.0
    toff_width: float = 0.5  # off-periods ~ U[(1-w), (1+w)] * mean
    seed: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.sigma <= 0 or self.t_fra <= 0 or self.gamma <= 0 or self.t_b <= 0:
            raise ValueError("durations must be positive")
        if self.t_on < 0:
            raise ValueError("t_on must be nonnegative")
        if not 0.0 <= self.toff_width < 1.0:
            raise ValueError("toff_width must lie in [0, 1)")

    @classmethod
    def from_mac(cls, n: int, mac: MacParams | None = None, **kw) -> "SimConfig":
        mac = mac or MacParams()
        return cls(n=n, tau=mac.tau, sigma=mac.sigma, t_fra=mac.t_fra, l_agg=mac.l_agg,
                   t_on=mac.t_on, gamma=mac.gamma, r=mac.lte_rate, **kw)

    def with_n(self, n: int) -> "SimConfig":
        return replace(self, n=n)


@dataclass(frozen=True)
class BatchResult:
    wifi_bits: np.ndarray  # per station
    lte_bits: float
    elapsed: float
    on_time: float
    cycles: int
    successes: int
    collisions: int
    truncated: int  # WiFi frames cut by an LTE on-period

    @property
    def n(self) -> int:
        return len(self.wifi_bits)

    @property
    def wifi_throughput(self) -> np.ndarray:
        return self.wifi_bits / self.elapsed

    @property
    def lte_throughput(self) -> float:
        return self.lte_bits / self.elapsed

    def as_row(self) -> dict:
        return {
            "n": self.n,
            "elapsed_s": self.elapsed,
            "lte_bps": self.lte_throughput,
            "wifi_mean_bps": float(np.mean(self.wifi_throughput)),
            "successes": self.successes,
            "collisions": self.collisions,
            "truncated": self.truncated,
            "cycles": self.cycles,
        }


def sample_toff(rng: np.random.Generator, toff_bar: float, size=None, width: float = 0.5):
    """Off-period durations, uniform on ``[(1 - width), (1 + width)] * toff_bar``."""
    if toff_bar <= 0:
        raise ValueError("mean off time must be positive")
    if width == 0:
        return toff_bar if size is None else np.full(size, float(toff_bar))
    return rng.uniform((1 - width) * toff_bar, (1 + width) * toff_bar, size)


class _ContentionStream:
    """Lazily extended stream of WiFi contention cycles.

    Cycle i: ``idle[i]`` idle slots, then one busy slot whose outcome is a
    success by ``winner[i]`` (or -1 for a collision).
    """

    def __init__(self, cfg: SimConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        n, tau = cfg.n, cfg.tau
        self.p_busy = 1.0 - (1.0 - tau) ** n
        self.p_succ_given_busy = n * tau * (1.0 - tau) ** (n - 1) / self.p_busy if self.p_busy > 0 else 0.0
        mean_idle = (1.0 - self.p_busy) / self.p_busy if self.p_busy > 0 else math.inf
        self.mean_cycle = mean_idle * cfg.sigma + cfg.t_fra
        self.busy_start = np.empty(0)
        self.end = np.empty(0)
        self.winner = np.empty(0, dtype=np.int64)
        self._end_list: list[float] = []

    def extend_to(self, horizon: float):
        """Make sure the stream covers ``horizon`` seconds of contention time."""
        while not self._end_list or self._end_list[-1] < horizon:
            have = self._end_list[-1] if self._end_list else 0.0
            count = int((horizon - have) / self.mean_cycle * 1.05) + 64
            self._append(count, have)

    def _append(self, count: int, origin: float):
        cfg, rng = self.cfg, self.rng
        idle = rng.geometric(self.p_busy, count) - 1
        dur = idle * cfg.sigma + cfg.t_fra
        end = origin + np.cumsum(dur)
        success = rng.random(count) < self.p_succ_given_busy
        winner = np.where(success, rng.integers(0, cfg.n, count), -1)
        self.busy_start = np.concatenate([self.busy_start, end - cfg.t_fra])
        self.end = np.concatenate([self.end, end])
        self.winner = np.concatenate([self.winner, winner])
        self._end_list.extend(end.tolist())

    def first_unfinished(self, t: float, lo: int) -> int:
        """Index of the first cycle (from ``lo``) still running at time t."""
        return bisect.bisect_right(self._end_list, t, lo)


def run_batch(cfg: SimConfig, toff_bar: float, rng: np.random.Generator | None = None) -> BatchResult:
    """Simulate whole LTE cycles until at least ``cfg.t_b`` seconds have elapsed."""
    if toff_bar <= 0:
        raise ValueError("mean off time must be positive")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if cfg.t_b < 100 * (cfg.t_on + toff_bar):
        warnings.warn(f"batch of {cfg.t_b}s spans fewer than 100 LTE cycles", stacklevel=2)
    if cfg.t_on == 0:
        return _wifi_only(cfg, rng)

    cycle = cfg.t_on + toff_bar
    count = int(cfg.t_b / cycle * 1.2) + 8
    toffs = sample_toff(rng, toff_bar, count, cfg.toff_width)
    while toffs.sum() + count * cfg.t_on < cfg.t_b:
        toffs = np.concatenate([toffs, sample_toff(rng, toff_bar, count, cfg.toff_width)])
        count = len(toffs)
    elapsed_cum = np.cumsum(toffs + cfg.t_on)
    cycles = int(np.searchsorted(elapsed_cum, cfg.t_b, side="left")) + 1
    toffs = toffs[:cycles]
    elapsed = float(elapsed_cum[cycles - 1])
    on_time = cycles * cfg.t_on

    if cfg.tau == 0:
        return BatchResult(np.zeros(cfg.n), cfg.r * on_time, elapsed, on_time, cycles, 0, 0, 0)

    stream = _ContentionStream(cfg, rng)
    stream.extend_to(toffs.sum() + cycles * 2 * cfg.t_fra + 1.0)
    crossing = np.empty(cycles, dtype=np.int64)
    origin, idx = 0.0, 0
    for i, toff in enumerate(toffs):
        stop = origin + toff
        if stream._end_list[-1] <= stop:
            stream.extend_to(stop + 1.0)
        c = stream.first_unfinished(stop, idx)
        crossing[i] = c
        origin = stream._end_list[c]  # the next off-period starts a fresh cycle
        idx = c + 1
    stops = np.concatenate([[0.0], stream.end[crossing[:-1]]]) + toffs
    in_flight = stream.busy_start[crossing] < stops
    overlap = np.where(in_flight, stream.end[crossing] - stops, 0.0)
    lost_subframes = np.ceil(overlap / cfg.gamma - 1e-12) * cfg.gamma
    lte_bits = float(cfg.r * np.sum(np.maximum(cfg.t_on - lost_subframes, 0.0)))

    used = idx
    completed = np.ones(used, dtype=bool)
    completed[crossing] = False
    winners = stream.winner[:used][completed]
    wins = winners[winners >= 0]
    wifi_bits = np.bincount(wins, minlength=cfg.n).astype(float) * cfg.l_agg
    return BatchResult(
        wifi_bits=wifi_bits,
        lte_bits=lte_bits,
        elapsed=elapsed,
        on_time=on_time,
        cycles=cycles,
        successes=int(len(wins)),
        collisions=int(np.sum(winners < 0)),
        truncated=int(np.sum(in_flight)),
    )


def _wifi_only(cfg: SimConfig, rng) -> BatchResult:
    if cfg.tau == 0:
        return BatchResult(np.zeros(cfg.n), 0.0, cfg.t_b, 0.0, 0, 0, 0, 0)
    stream = _ContentionStream(cfg, rng)
    stream.extend_to(cfg.t_b)
    used = bisect.bisect_left(stream._end_list, cfg.t_b) + 1
    winners = stream.winner[:used]
    wins = winners[winners >= 0]
    wifi_bits = np.bincount(wins, minlength=cfg.n).astype(float) * cfg.l_agg
    return BatchResult(wifi_bits, 0.0, float(stream.end[used - 1]), 0.0, 0, int(len(wins)),
                       int(np.sum(winners < 0)), 0)


def noisy_cost(batch: BatchResult, params: CoexistenceParams | None = None) -> float:
    """Proportional-fair cost from measured batch throughputs.

    `params` is only used to check that the batch has one entry per station.
    """
    if params is not None and params.n != batch.n:
        raise ValueError(f"batch has {batch.n} stations, params expect {params.n}")
    lte = batch.lte_throughput
    wifi = batch.wifi_throughput
    if lte <= 0 or np.any(wifi <= 0):
        raise BatchTooShort(
            f"zero measured throughput over {batch.elapsed:.3g}s (lte={lte:.3g}, min wifi={wifi.min():.3g});"
            " lengthen the batch"
        )
    return float(-math.log(lte) - np.sum(np.log(wifi)))


def analytic_params(cfg: SimConfig, p_txa: float | None = None) -> CoexistenceParams:
    """The analytic model matching a simulator configuration."""
    from .coexistence import wifi_baseline_rate

    sj = wifi_baseline_rate(cfg.tau, cfg.sigma, cfg.t_fra, cfg.t_fra, cfg.l_agg, cfg.n)
    if p_txa is None:
        p_txa = 1.0 - (1.0 - cfg.tau) ** cfg.n
    return CoexistenceParams.derive(cfg.n, cfg.t_on, cfg.r, sj, cfg.t_fra, p_txa, cfg.gamma)


@dataclass(frozen=True)
class CalibrationRow:
    n: int
    toff_ms: float
    lte_sim: float
    lte_model: float
    wifi_sim: float  # mean per station
    wifi_model: float
    wifi_worst_station: float  # largest per-station relative error

    @property
    def lte_error(self) -> float:
        return abs(self.lte_sim / self.lte_model - 1.0)

    @property
    def wifi_error(self) -> float:
        return abs(self.wifi_sim / self.wifi_model - 1.0)

    def passes(self, tol: float = 0.05) -> bool:
        return self.lte_error <= tol and self.wifi_error <= tol


def calibrate(ns=(1, 5, 10), toffs=(0.05, 0.2, 0.5), base: SimConfig | None = None, seed: int = 0,
              replications: int = 1) -> list[CalibrationRow]:
    """Compare simulated throughputs with the analytic model on a grid of (n, mean off time)."""
    base = base or SimConfig()
    rows = []
    ss = np.random.SeedSequence(seed)
    for n in ns:
        cfg = base.with_n(n)
        params = analytic_params(cfg)
        for toff in toffs:
            batches = [run_batch(cfg, toff, np.random.default_rng(child))
                       for child in ss.spawn(replications)]
            lte = float(np.mean([b.lte_throughput for b in batches]))
            per_station = np.mean([b.wifi_throughput for b in batches], axis=0)
            model_wifi = np.array([params.s[j] * (toff - params.c1) / (params.t_on + toff) for j in range(n)])
            model_lte = params.r * (params.t_on - params.c2) / (params.t_on + toff)
            rows.append(CalibrationRow(
                n=n, toff_ms=toff * 1e3, lte_sim=lte, lte_model=model_lte,
                wifi_sim=float(per_station.mean()), wifi_model=float(model_wifi.mean()),
                wifi_worst_station=float(np.max(np.abs(per_station / model_wifi - 1.0))),
            ))
    return rows
