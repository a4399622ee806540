"""Seeded, replicated runs of the learner against the coexistence environments."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import coexistence as coex
from .adversaries import (
    LossFunction,
    RegretLedger,
    corollary_bound,
    instantaneous_deviation,
    measured_lipschitz,
    measured_range,
    theorem1_bound,
)
from .learner import DecisionInterval, OGDSeMP, PowerSchedule
from .packet_sim import SimConfig, noisy_cost, run_batch

SCENARIOS = ("omega_sweep", "schedule_sweep", "slow_dynamics", "fast_dynamics", "noisy_sim", "bound_check")


@dataclass
class LearnerConfig:
    omega: float = 0.01
    exponent: float = 0.75
    eta: float = 1.0
    eta_exponent: float = 0.5
    constant: bool = False
    lower: float = -6.9
    upper: float = 0.0
    y0: float | None = None
    lipschitz: float | None = None
    truncate: bool = True
    truncation_factor: float = 10.0
    truncation_threshold: float | None = None

    @property
    def interval(self) -> DecisionInterval:
        return DecisionInterval(self.lower, self.upper)


@dataclass
class EnvConfig:
    kind: str = "analytic"
    n: int = 10
    t_on: float = 0.05
    tau: float = 1.0 / 16.0
    sigma: float = 9e-6
    phy_rate: float = 65e6
    overhead: float = 100e-6
    packets: int = 5
    packet_bytes: int = 1500
    gamma: float = 1e-3
    lte_rate: float = 75e6
    p_txa: float | None = None
    batch: float = 50.0
    toff_width: float = 0.5

    @property
    def mac(self) -> coex.MacParams:
        return coex.MacParams(tau=self.tau, sigma=self.sigma, phy_rate=self.phy_rate, overhead=self.overhead,
                              packets=self.packets, packet_bytes=self.packet_bytes, gamma=self.gamma,
                              lte_rate=self.lte_rate, t_on=self.t_on, p_txa=self.p_txa)


@dataclass
class DynamicsEvent:
    iteration: int  # number of completed updates before the switching iteration
    n: int


@dataclass
class ExperimentPlan:
    scenario: str = "omega_sweep"
    iterations: int = 100
    replications: int = 25
    seed: int = 0
    seeds: list[int] | None = None
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    environment: EnvConfig = field(default_factory=EnvConfig)
    dynamics: list[DynamicsEvent] = field(default_factory=list)
    switch: str = "mid"  # "mid": between the two queries; "update": after the step
    track_regret: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.switch not in ("mid", "update"):
            raise ValueError(f"switch must be 'mid' or 'update', got {self.switch!r}")
        its = [e.iteration for e in self.dynamics]
        if any(b <= a for a, b in zip(its, its[1:])):
            raise ValueError("dynamics iterations must be strictly increasing")
        if len(set(self.seed_list())) != len(self.seed_list()):
            raise ValueError("seeds must be distinct")

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.seed + i for i in range(self.replications)]

    def initial_n(self) -> int:
        if self.dynamics and self.dynamics[0].iteration == 0:
            return self.dynamics[0].n
        return self.environment.n

    def n_values(self) -> list[int]:
        return sorted({self.initial_n(), *(e.n for e in self.dynamics)})


@dataclass
class IterationRow:
    k: int  # completed updates
    t: int  # rounds elapsed
    y: float
    x_plus: float
    x_minus: float
    toff: float
    gradient: float
    raw_gradient: float
    truncated: bool
    n: int
    s_lte: float
    s_wifi_mean: float
    z_opt: float
    toff_opt: float
    s_lte_opt: float
    s_wifi_opt: float
    cost_gap: float
    regret: float

    @property
    def throughput_gap(self) -> float:
        """Largest relative deviation of LTE / mean-WiFi throughput from the optimum."""
        return max(abs(self.s_lte / self.s_lte_opt - 1.0), abs(self.s_wifi_mean / self.s_wifi_opt - 1.0))


@dataclass
class RoundEvent:
    k: int
    t: int
    x: float
    n: int
    cost: float  # analytic cost f_t(x_t)
    observed: float  # what the learner saw


@dataclass
class TrajectoryRecord:
    run_id: int
    seed: int
    rows: list[IterationRow]
    events: list[RoundEvent]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)


class AnalyticEnvironment:
    """Exact costs of the proportional-fair objective for the current n."""

    def __init__(self, cfg: EnvConfig, interval: DecisionInterval):
        self.cfg = cfg
        self.interval = interval
        self.params = coex.ParamCache(cfg.mac)
        self._losses: dict[int, LossFunction] = {}
        self._optima: dict[int, coex.Optimum] = {}

    def loss(self, n: int) -> LossFunction:
        if n not in self._losses:
            p = self.params(n)
            self._losses[n] = LossFunction(
                lambda z, p=p: coex.cost(p, z),
                lambda z, p=p: coex.analytic_gradient(p, z),
                lipschitz=self.gradient_bound(n),
                name=f"coexistence(n={n})",
            )
        return self._losses[n]

    def gradient_bound(self, n: int) -> float:
        p = self.params(n)
        return max(abs(coex.analytic_gradient(p, self.interval.lower)),
                   abs(coex.analytic_gradient(p, self.interval.upper)))

    def optimum(self, n: int) -> coex.Optimum:
        if n not in self._optima:
            self._optima[n] = coex.optimum(self.params(n), self.interval)
        return self._optima[n]

    def evaluate(self, x: float, n: int) -> tuple[float, float]:
        value = float(self.loss(n)(x))
        return value, value


class SimEnvironment(AnalyticEnvironment):
    """Costs measured from packet-simulator batches; analytic cost kept as ground truth."""

    def __init__(self, cfg: EnvConfig, interval: DecisionInterval, rng: np.random.Generator):
        super().__init__(cfg, interval)
        self.rng = rng
        self.sim = SimConfig.from_mac(cfg.n, cfg.mac, t_b=cfg.batch, toff_width=cfg.toff_width)

    def evaluate(self, x: float, n: int) -> tuple[float, float]:
        p = self.params(n)
        batch = run_batch(self.sim.with_n(n), coex.ztilde_to_toff(x, p.c1), self.rng)
        return float(self.loss(n)(x)), noisy_cost(batch)


def make_learner(cfg: LearnerConfig, rng, lipschitz: float | None) -> OGDSeMP:
    return OGDSeMP(
        cfg.interval,
        exploration=PowerSchedule(cfg.omega, cfg.exponent, cfg.constant),
        step=PowerSchedule(cfg.eta, cfg.eta_exponent, cfg.constant),
        seed=rng,
        y0=cfg.y0,
        lipschitz=lipschitz,
        truncation_factor=cfg.truncation_factor,
        truncation_threshold=cfg.truncation_threshold,
        truncate=cfg.truncate,
    )


def run_replication(plan: ExperimentPlan, run_id: int, seed: int) -> TrajectoryRecord:
    learner_rng, env_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    interval = plan.learner.interval
    if plan.environment.kind == "analytic":
        env = AnalyticEnvironment(plan.environment, interval)
    elif plan.environment.kind == "sim":
        env = SimEnvironment(plan.environment, interval, env_rng)
    else:
        raise ValueError(f"unknown environment kind {plan.environment.kind!r}")

    G = plan.learner.lipschitz
    if G is None:
        G = max(env.gradient_bound(n) for n in plan.n_values())
    learner = make_learner(plan.learner, learner_rng, G)

    switches = {e.iteration: e.n for e in plan.dynamics if e.iteration > 0}
    n = plan.initial_n()
    ledger = RegretLedger()
    rows, events = [], []
    for it in range(plan.iterations):
        new_n = switches.get(it)
        t, x_plus = learner.next_query()
        true, seen = env.evaluate(x_plus, n)
        learner.observe(seen)
        events.append(RoundEvent(it + 1, t, x_plus, n, true, seen))
        ledger.record(t, x_plus, env.loss(n), true)
        if new_n is not None and plan.switch == "mid":
            n = new_n
        t, x_minus = learner.next_query()
        true, seen = env.evaluate(x_minus, n)
        report = learner.observe(seen)
        events.append(RoundEvent(it + 1, t, x_minus, n, true, seen))
        ledger.record(t, x_minus, env.loss(n), true)
        if new_n is not None:
            n = new_n

        p, opt = env.params(n), env.optimum(n)
        toff = coex.ztilde_to_toff(report.y, p.c1)
        reg = math.nan
        if plan.track_regret:
            reg = ledger.cumulative_regret(interval)
        rows.append(IterationRow(
            k=it + 1, t=t, y=report.y, x_plus=x_plus, x_minus=x_minus, toff=toff,
            gradient=report.gradient, raw_gradient=report.raw_gradient, truncated=report.truncated, n=n,
            s_lte=coex.lte_throughput(p, toff), s_wifi_mean=coex.mean_wifi_throughput(p, toff),
            z_opt=opt.ztilde, toff_opt=opt.toff, s_lte_opt=opt.s_lte, s_wifi_opt=opt.s_wifi_mean,
            cost_gap=float(coex.cost(p, report.y)) - opt.cost, regret=reg,
        ))
    return TrajectoryRecord(run_id, seed, rows, events)


def _run_one(args):
    return run_replication(*args)


def run_plan(plan: ExperimentPlan, workers: int = 1) -> list[TrajectoryRecord]:
    """One trajectory per seed, in seed order."""
    jobs = [(plan, i, s) for i, s in enumerate(plan.seed_list())]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [run_replication(*job) for job in jobs]


@dataclass
class Summary:
    k: np.ndarray
    stats: dict[str, dict[str, np.ndarray]]
    convergence: list[int | None]
    tolerance: float

    def mean_convergence(self) -> float:
        done = [c for c in self.convergence if c is not None]
        return float(np.mean(done)) if done else math.nan


TRACKED = ("y", "toff", "gradient", "s_lte", "s_wifi_mean", "cost_gap", "regret", "toff_opt", "n")


def convergence_time(record: TrajectoryRecord, tolerance: float = 0.02) -> int | None:
    """First k from which |toff - toff_opt| stays within tolerance until the end."""
    err = np.abs(record.column("toff") - record.column("toff_opt"))
    if len(err) == 0 or err[-1] > tolerance:
        return None
    bad = np.nonzero(err > tolerance)[0]
    return int(record.rows[bad[-1] + 1].k) if len(bad) else int(record.rows[0].k)


def aggregate(records: list[TrajectoryRecord], tolerance: float = 0.02) -> Summary:
    if not records:
        raise ValueError("nothing to aggregate")
    stats = {}
    for name in TRACKED:
        data = np.array([r.column(name) for r in records])
        stats[name] = {
            "mean": data.mean(axis=0),
            "std": data.std(axis=0),
            "min": data.min(axis=0),
            "max": data.max(axis=0),
        }
    k = records[0].column("k")
    return Summary(k, stats, [convergence_time(r, tolerance) for r in records], tolerance)


def preset(scenario: str, **overrides) -> ExperimentPlan:
    """Plans mirroring the standard studies; keyword overrides replace plan fields."""
    if scenario == "omega_sweep":
        plan = ExperimentPlan(scenario, iterations=100)
    elif scenario == "schedule_sweep":
        plan = ExperimentPlan(scenario, iterations=100, replications=1)
    elif scenario == "slow_dynamics":
        steps = [2, 3, 4, 5, 4, 3, 2, 1]
        plan = ExperimentPlan(scenario, iterations=50 * (len(steps) + 1),
                              environment=EnvConfig(n=1),
                              dynamics=[DynamicsEvent(50 * (i + 1), n) for i, n in enumerate(steps)])
    elif scenario == "fast_dynamics":
        plan = ExperimentPlan(scenario, iterations=150, environment=EnvConfig(n=10),
                              dynamics=[DynamicsEvent(50, 5), DynamicsEvent(100, 10)])
    elif scenario == "noisy_sim":
        plan = ExperimentPlan(scenario, iterations=100, learner=LearnerConfig(omega=1.0),
                              environment=EnvConfig(kind="sim"), track_regret=False)
    elif scenario == "bound_check":
        return bound_check_plan(**overrides)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return replace(plan, **overrides)


def bound_check_plan(horizon: int = 2000, n_before: int = 5, n_after: int = 10, **overrides) -> ExperimentPlan:
    """Constant-parameter run on a one-switch piecewise coexistence adversary.

    The switch falls between the two rounds of the middle iteration, and the
    constant (eta, delta) follow the piecewise-regime tuning using G and C
    measured on the two losses.
    """
    if horizon % 4:
        raise ValueError("horizon must be a multiple of 4")
    learner = LearnerConfig(constant=True, truncate=False)
    env = EnvConfig(n=n_before)
    probe = AnalyticEnvironment(env, learner.interval)
    losses = [probe.loss(n_before), probe.loss(n_after)]
    G = measured_lipschitz(losses, learner.interval)
    C = measured_range(losses, learner.interval)
    tuned = corollary_bound("switching_total", horizon, learner.interval.diameter, G, C, N=1)
    learner = replace(learner, omega=tuned.delta, eta=tuned.eta)
    plan = ExperimentPlan("bound_check", iterations=horizon // 2, learner=learner, environment=env,
                          dynamics=[DynamicsEvent(horizon // 4, n_after)], switch="mid")
    return replace(plan, **overrides)


@dataclass
class BoundReport:
    T: int
    D: float
    G: float
    C: float
    L: float
    eta: float
    delta: float
    theorem1: float
    corollary: float
    regret_T: np.ndarray
    regret_half: np.ndarray

    @property
    def mean_regret(self) -> float:
        return float(self.regret_T.mean())

    @property
    def stderr(self) -> float:
        return float(self.regret_T.std(ddof=1) / math.sqrt(len(self.regret_T))) if len(self.regret_T) > 1 else 0.0

    @property
    def sublinear(self) -> bool:
        return self.regret_T.mean() / self.T < self.regret_half.mean() / (self.T / 2)


def round_losses(plan: ExperimentPlan) -> list[int]:
    """Station count in force at every round of a plan (1-based rounds -> list index + 1)."""
    switches = {e.iteration: e.n for e in plan.dynamics if e.iteration > 0}
    n, out = plan.initial_n(), []
    for it in range(plan.iterations):
        new_n = switches.get(it)
        out.append(n)
        if new_n is not None and plan.switch == "mid":
            n = new_n
        out.append(n)
        if new_n is not None:
            n = new_n
    return out


def bound_report(plan: ExperimentPlan, regret_T, regret_half, grid_points: int = 10_000) -> BoundReport:
    """Theoretical bounds for a finished constant-parameter run next to its measured regret."""
    if not plan.learner.constant:
        raise ValueError("the bounds assume constant eta and delta; run with learner.constant = true")
    interval = plan.learner.interval
    env = AnalyticEnvironment(plan.environment, interval)
    ns = round_losses(plan)
    losses = [env.loss(n) for n in plan.n_values()]
    G = measured_lipschitz(losses, interval, grid_points)
    C = measured_range(losses, interval, grid_points)
    dev = {}
    L = 0.0
    for k in range(len(ns) // 2):
        a, b = ns[2 * k], ns[2 * k + 1]
        if (a, b) not in dev:
            dev[(a, b)] = instantaneous_deviation(env.loss(a), env.loss(b), interval, grid_points)
        L += dev[(a, b)] ** 2
    T = len(ns)
    D = interval.diameter
    eta, delta = plan.learner.eta, plan.learner.omega
    switches = sum(1 for a, b in zip(ns, ns[1:]) if a != b)
    return BoundReport(
        T=T, D=D, G=G, C=C, L=L, eta=eta, delta=delta,
        theorem1=theorem1_bound(D, G, eta, delta, T, L),
        corollary=corollary_bound("switching_total", T, D, G, C, N=switches).bound,
        regret_T=np.asarray(regret_T, dtype=float),
        regret_half=np.asarray(regret_half, dtype=float),
    )


def plan_fields(cls) -> list[str]:
    return [f.name for f in fields(cls)]
