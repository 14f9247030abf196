"""Tick-based scenario runner and Monte Carlo sweeps.

Scenario runs drive the full protocol (demand, wake-up, handover).  Sweeps
instead pin neighbor FAP modes directly and measure the reference UE, which
is how the activity-vs-SNIR curves are produced.
"""

from __future__ import annotations

import enum
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import radio
from .errors import ConfigError, MetricError, ProtocolError
from .protocol import (
    MACRO,
    HandoverPolicy,
    Network,
    UeEvent,
    UeNode,
    UeState,
    camp_cell,
    check_invariants,
    fgw_share,
)
from .radio import RadioConfig
from .topology import (
    UE_HEIGHT_M,
    FapSite,
    Layout,
    LayoutSpec,
    Position,
    generate_default_layout,
    horizontal_distance,
    place_reference_ue,
)

logger = logging.getLogger(__name__)

__all__ = [
    "BaselineMode",
    "UeSpec",
    "ScheduledEvent",
    "SweepSettings",
    "Scenario",
    "build_layout",
    "World",
    "RunResult",
    "step",
    "run",
    "snapshot_metrics",
    "SweepVariable",
    "SweepSpec",
    "SeriesStats",
    "SweepPoint",
    "SweepResult",
    "reference_link",
    "snir_for_masks",
    "trial_rng",
    "run_probability_sweep",
    "run_count_sweep",
    "run_sweep",
]


class BaselineMode(enum.Enum):
    PROPOSED = "proposed"
    EXISTING = "existing"


@dataclass(frozen=True)
class UeSpec:
    """Initial UE placement and straight-line motion."""

    id: str
    x: float
    y: float
    state: UeState = UeState.IDLE
    serving: Optional[str] = None
    vx: float = 0.0
    vy: float = 0.0
    start: int = 1  # first tick with motion
    until: Optional[int] = None  # last tick with motion; None = whole run

    def __post_init__(self):
        if self.state is UeState.DETACHED and self.serving is not None:
            raise ConfigError(f"UE {self.id}: a detached UE cannot have a serving cell")

    def node(self, layout: Layout) -> UeNode:
        """Initial node; idle and active UEs without a serving cell camp on the best one."""
        pos = Position(self.x, self.y, UE_HEIGHT_M)
        serving = self.serving
        if serving is None and self.state is not UeState.DETACHED:
            serving = camp_cell(layout, pos)
        return UeNode(self.id, pos, self.state, serving, (self.vx, self.vy))


@dataclass(frozen=True)
class ScheduledEvent:
    tick: int
    ue: str
    event: UeEvent


@dataclass(frozen=True)
class SweepSettings:
    trials: int = 1000
    seed: int = 1
    crn: Optional[bool] = None  # None: off for probability sweeps, on for count sweeps
    subset: str = "averaged"  # or "fixed": one random subset per count shared by all trials
    ue_distance: float = 5.0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.subset not in ("averaged", "fixed"):
            raise ConfigError(f"subset must be 'averaged' or 'fixed', got {self.subset!r}")
        if not self.ue_distance > 0:
            raise ConfigError("ue_distance must be positive")


def build_layout(cfg: RadioConfig, spec: LayoutSpec,
                 sites: Optional[Sequence[tuple]] = None) -> Layout:
    """Default ring layout, or an explicit list of ``(id, x, y, tier)`` sites."""
    ring = generate_default_layout(cfg, spec)
    if sites is None:
        return ring
    walls_for = {0: 0, 1: spec.tier1_walls, 2: spec.tier2_walls}
    built = []
    for fap_id, x, y, tier in sites:
        walls = walls_for.get(tier, tier)
        built.append(FapSite(fap_id, Position(x, y, spec.fap_height), tier, walls,
                             spec.cell_radius))
    refs = [s for s in built if s.tier == 0]
    if len(refs) != 1:
        raise ConfigError(f"explicit layouts need exactly one tier-0 site, got {len(refs)}")
    neighbors = tuple(s for s in built if s.tier != 0)
    return Layout(refs[0], neighbors, ring.macro_pos, spec.fap_height, spec.fap_spacing)


@dataclass(frozen=True)
class Scenario:
    radio: RadioConfig = RadioConfig()
    layout_spec: LayoutSpec = LayoutSpec()
    sites: Optional[tuple] = None
    ues: tuple = ()
    schedule: tuple = ()
    mode: BaselineMode = BaselineMode.PROPOSED
    ticks: int = 100
    tick_seconds: float = 0.1
    seed: int = 0
    wake_margin: float = 2.0
    link_down: tuple = ()
    sweep: SweepSettings = SweepSettings()
    layout: Layout = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "layout", build_layout(self.radio, self.layout_spec, self.sites))
        if self.ticks <= 0:
            raise ConfigError("ticks must be positive")
        if not self.tick_seconds > 0:
            raise ConfigError("tick_seconds must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.wake_margin < 0:
            raise ConfigError("wake_margin must be non-negative")
        ticks = [e.tick for e in self.schedule]
        if ticks != sorted(ticks):
            raise ConfigError("schedule must be sorted by tick")
        if ticks and ticks[0] < 1:
            raise ConfigError("scheduled events start at tick 1")
        ue_ids = [u.id for u in self.ues]
        if len(set(ue_ids)) != len(ue_ids):
            raise ConfigError("duplicate UE ids")
        for e in self.schedule:
            if e.ue not in ue_ids:
                raise ConfigError(f"schedule refers to unknown UE {e.ue!r}")
        fap_ids = {s.id for s in self.layout.sites}
        for u in self.ues:
            if u.serving not in (None, MACRO) and u.serving not in fap_ids:
                raise ConfigError(f"UE {u.id} served by unknown cell {u.serving!r}")
        for f in self.link_down:
            if f not in fap_ids:
                raise ConfigError(f"link_down names unknown FAP {f!r}")

    def with_mode(self, mode: BaselineMode) -> "Scenario":
        return replace(self, mode=mode)


# Scenario runs


class World:
    """A running scenario: the protocol network plus the pending schedule."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        policy = HandoverPolicy(scenario.wake_margin, frozenset(scenario.link_down),
                                existing=scenario.mode is BaselineMode.EXISTING)
        self.net = Network(scenario.layout, scenario.radio,
                           [u.node(scenario.layout) for u in scenario.ues], policy)
        self.motion = {u.id: (u.vx, u.vy, u.start, u.until)
                       for u in scenario.ues if u.vx or u.vy}
        self.events_at = defaultdict(list)
        for e in scenario.schedule:
            self.events_at[e.tick].append(e)

    @property
    def tick(self) -> int:
        return self.net.tick


def step(world: World, tick: Optional[int] = None) -> World:
    """Advance one tick: events, motion, FGW sharing, handovers, mode settling."""
    net = world.net
    if tick is not None and tick != net.tick + 1:
        raise ProtocolError(f"step must advance by one tick (at {net.tick}, asked for {tick})")
    net.tick += 1
    t = net.tick
    try:
        for e in world.events_at.get(t, ()):
            net.apply_ue_event(e.ue, e.event)
        dt = world.scenario.tick_seconds
        for ue_id, (vx, vy, start, until) in world.motion.items():
            if start <= t and (until is None or t <= until):
                net.set_position(ue_id, net.ues[ue_id].pos.moved(vx * dt, vy * dt))
        net.recamp_idle()
        net.prune_wake_requests()
        fgw_share(net.registry, net, t)
        for ue_id in sorted(net.ues):
            if net.ues[ue_id].state is UeState.ACTIVE:
                net.apply_decision(ue_id, net.evaluate(ue_id))
        net.settle_all()
    except ProtocolError as exc:
        raise ProtocolError(f"tick {t}: {exc}") from exc
    net.account_energy()
    return world


@dataclass
class RunResult:
    log: list
    handovers: int
    aborts: int
    energy_duty: float
    world: World

    def log_text(self) -> str:
        lines = ["tick\tentity\told\tnew\tcause"]
        lines += [r.to_line() for r in self.log]
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        return (f"handovers={self.handovers} aborts={self.aborts} "
                f"mean_energy_duty={self.energy_duty:.6g}")


def run(scenario: Scenario, check_invariants_each_tick: bool = False, observer=None) -> RunResult:
    """Run ``scenario`` for its configured number of ticks.

    ``observer`` is called with the world after every settled tick.
    """
    world = World(scenario)
    if check_invariants_each_tick:
        check_invariants(world.net)
    for _ in range(scenario.ticks):
        step(world)
        if check_invariants_each_tick:
            check_invariants(world.net)
        if observer is not None:
            observer(world)
    net = world.net
    return RunResult(list(net.log), net.handovers, net.aborts, net.energy_duty(), world)


def snapshot_metrics(world: World, ue_id: str) -> tuple[float, float]:
    """SNIR (dB) and throughput (bit/s) of a UE served by the reference FAP."""
    net = world.net
    ue = net.ues.get(ue_id)
    layout, cfg = net.layout, net.cfg
    if ue is None or ue.state is not UeState.ACTIVE:
        raise MetricError(f"{ue_id} is not an active UE")
    if ue.serving != layout.reference.id:
        raise MetricError(f"{ue_id} is served by {ue.serving}, not the reference FAP")
    active = net.registry.active_fap_list
    signal, interferers = reference_link(layout, cfg, ue.pos)
    i_active = sum(p for s, p in zip(layout.neighbors, interferers) if s.id in active)
    i_idle = sum(p for s, p in zip(layout.neighbors, interferers) if s.id not in active)
    breakdown = radio.InterferenceBreakdown(i_active, cfg.beacon_duty * i_idle,
                                            radio.macro_interference(cfg))
    snir = radio.snir_linear(signal, breakdown, cfg.noise_power)
    return radio.db_from_linear(snir), radio.capacity(cfg.bandwidth_w, snir)


# Sweeps


class SweepVariable(enum.Enum):
    ACTIVATION_PROBABILITY = "probability"
    ACTIVE_COUNT = "count"


@dataclass(frozen=True)
class SweepSpec:
    variable: SweepVariable
    points: tuple
    trials: int = 1000
    seed: int = 1
    crn: Optional[bool] = None
    subset: str = "averaged"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if not self.points:
            raise ConfigError("a sweep needs at least one point")
        if self.subset not in ("averaged", "fixed"):
            raise ConfigError(f"unknown subset mode {self.subset!r}")
        if self.variable is SweepVariable.ACTIVATION_PROBABILITY:
            if any(not 0.0 <= p <= 1.0 for p in self.points):
                raise ConfigError("probability points must lie in [0, 1]")
        elif any(int(k) != k or k < 0 for k in self.points):
            raise ConfigError("count points must be non-negative integers")

    @property
    def common_random_numbers(self) -> bool:
        if self.crn is not None:
            return self.crn
        return self.variable is SweepVariable.ACTIVE_COUNT


@dataclass(frozen=True)
class SeriesStats:
    mean_snir_db: float
    std_snir_db: float
    mean_snir_linear: float
    mean_throughput_bps: float
    std_throughput_bps: float
    mean_active_fraction: float
    energy_duty: float


@dataclass
class SweepPoint:
    value: float
    trials: int
    proposed: SeriesStats
    existing: SeriesStats
    proposed_snir: np.ndarray = field(repr=False)  # per-trial linear SNIR
    existing_snir: np.ndarray = field(repr=False)
    active_counts: np.ndarray = field(repr=False)


@dataclass
class SweepResult:
    variable: SweepVariable
    points: list


def reference_link(layout: Layout, cfg: RadioConfig, ue_pos: Position):
    """Serving power and per-neighbor full-power interference at the reference UE.

    Neighbor losses use each site's tier wall count at the true UE distance.
    """
    d_r = horizontal_distance(ue_pos, layout.reference.pos)
    signal = radio.received_power(cfg.p0_fap, radio.path_loss_reference(cfg.f_ue, d_r,
                                                                         cfg.n_coeff))
    interferers = np.array([
        radio.received_power(cfg.p0_fap, radio.path_loss_neighbor(
            cfg.f_ue, horizontal_distance(ue_pos, s.pos), cfg.n_coeff,
            s.walls_to_reference_area))
        for s in layout.neighbors], dtype=float)
    return signal, interferers


def snir_for_masks(signal: float, interferers: np.ndarray, masks: np.ndarray,
                   cfg: RadioConfig) -> np.ndarray:
    """Linear SNIR for each row of a boolean FAM mask (trials x neighbors)."""
    i_active = np.where(masks, interferers, 0.0).sum(axis=1)
    i_idle = cfg.beacon_duty * np.where(masks, 0.0, interferers).sum(axis=1)
    return signal / (i_active + i_idle + radio.macro_interference(cfg) + cfg.noise_power)


def trial_rng(*key: int) -> np.random.Generator:
    """Independent counter-based stream for a (seed, point, trial) style key."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def _std(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def _stats(snir: np.ndarray, fractions: np.ndarray, cfg: RadioConfig, duty: float) -> SeriesStats:
    snir_db = 10.0 * np.log10(snir)
    throughput = cfg.bandwidth_w * np.log2(1.0 + snir)
    return SeriesStats(
        mean_snir_db=float(np.mean(snir_db)),
        std_snir_db=_std(snir_db),
        mean_snir_linear=float(np.mean(snir)),
        mean_throughput_bps=float(np.mean(throughput)),
        std_throughput_bps=_std(throughput),
        mean_active_fraction=float(np.mean(fractions)),
        energy_duty=duty,
    )


def _sweep(scenario: Scenario, spec: SweepSpec, masks_for_point) -> SweepResult:
    cfg, layout = scenario.radio, scenario.layout
    n = len(layout.neighbors)
    if n == 0:
        raise ConfigError("sweeps need at least one neighbor FAP")
    ue_pos = place_reference_ue(layout, scenario.sweep.ue_distance)
    signal, interferers = reference_link(layout, cfg, ue_pos)
    all_on = np.ones((spec.trials, n), dtype=bool)
    existing_snir = snir_for_masks(signal, interferers, all_on, cfg)
    existing = _stats(existing_snir, np.ones(spec.trials), cfg, 1.0)
    points = []
    for idx, value in enumerate(spec.points):
        masks = masks_for_point(idx, value, n)
        snir = snir_for_masks(signal, interferers, masks, cfg)
        counts = masks.sum(axis=1)
        fractions = counts / n
        duty = float(np.mean(fractions))
        points.append(SweepPoint(float(value), spec.trials, _stats(snir, fractions, cfg, duty),
                                 existing, snir, existing_snir, counts))
    return SweepResult(spec.variable, points)


def run_probability_sweep(scenario: Scenario, spec: SweepSpec) -> SweepResult:
    """Each neighbor is independently FAM with probability p in every trial."""
    if spec.variable is not SweepVariable.ACTIVATION_PROBABILITY:
        raise ConfigError("run_probability_sweep needs an activation-probability spec")
    n = len(scenario.layout.neighbors)
    shared = None
    if spec.common_random_numbers:
        shared = np.stack([trial_rng(spec.seed, t).random(n) for t in range(spec.trials)])

    def masks_for_point(idx, p, n):
        if shared is not None:
            u = shared
        else:
            u = np.stack([trial_rng(spec.seed, idx, t).random(n) for t in range(spec.trials)])
        return u < p

    return _sweep(scenario, spec, masks_for_point)


def run_count_sweep(scenario: Scenario, spec: SweepSpec) -> SweepResult:
    """Exactly k neighbors are FAM in every trial, chosen uniformly at random.

    With common random numbers the k active FAPs are the first k entries of
    one random permutation per trial, so the active sets are nested in k and
    SNIR cannot increase with k within a trial.
    """
    if spec.variable is not SweepVariable.ACTIVE_COUNT:
        raise ConfigError("run_count_sweep needs an active-count spec")
    n = len(scenario.layout.neighbors)
    for k in spec.points:
        if k > n:
            raise ConfigError(f"active count {k} exceeds the {n} neighbor FAPs")
    trials = spec.trials
    fixed = spec.subset == "fixed"
    perms = None
    if spec.common_random_numbers:
        if fixed:
            perms = np.tile(trial_rng(spec.seed).permutation(n), (trials, 1))
        else:
            perms = np.stack([trial_rng(spec.seed, t).permutation(n) for t in range(trials)])

    def masks_for_point(idx, k, n):
        k = int(k)
        if perms is not None:
            chosen = perms[:, :k]
        elif fixed:
            chosen = np.tile(trial_rng(spec.seed, idx).permutation(n)[:k], (trials, 1))
        else:
            chosen = np.stack([trial_rng(spec.seed, idx, t).permutation(n)[:k]
                               for t in range(trials)]).reshape(trials, k)
        masks = np.zeros((trials, n), dtype=bool)
        np.put_along_axis(masks, chosen.astype(np.intp), True, axis=1)
        return masks

    return _sweep(scenario, spec, masks_for_point)


def run_sweep(scenario: Scenario, spec: SweepSpec) -> SweepResult:
    logger.debug("sweep %s over %d points x %d trials", spec.variable.value,
                 len(spec.points), spec.trials)
    if spec.variable is SweepVariable.ACTIVATION_PROBABILITY:
        return run_probability_sweep(scenario, spec)
    return run_count_sweep(scenario, spec)
