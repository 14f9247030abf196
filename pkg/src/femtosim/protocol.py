"""On-demand FAP activation and handover protocol.

A FAP stays in femto-idle-mode (FIM, beacons only) until something creates
demand for it: an attached UE going active, or a pending wake request from
an active UE approaching its coverage edge.  Once demand disappears the FAP
drops back to FIM.  The femto gateway (FGW) keeps the list of active FAPs
and the monitoring reports used by the handover evaluator.

All mutation happens through :class:`Network`, which the engine drives one
tick at a time from a single thread.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import radio
from .errors import ProtocolError
from .radio import RadioConfig
from .topology import FapSite, Layout, Position, horizontal_distance, walls_between

__all__ = [
    "MACRO",
    "UeState",
    "FapMode",
    "UeEvent",
    "UeNode",
    "FapNode",
    "FgwRegistry",
    "NoAction",
    "WakeTarget",
    "Execute",
    "Abort",
    "HandoverPolicy",
    "LinkSnapshot",
    "EventRecord",
    "Network",
    "ue_event",
    "camp_cell",
    "demand",
    "settle_fap_mode",
    "link_snapshot",
    "cell_snir",
    "evaluate_handover",
    "decide_handover",
    "apply_handover",
    "fgw_share",
    "check_invariants",
]

MACRO = "macro"
MIN_LINK_DISTANCE_M = 1.0


class UeState(enum.Enum):
    DETACHED = "detached"
    IDLE = "idle"
    ACTIVE = "active"


class FapMode(enum.Enum):
    FIM = "FIM"
    FAM = "FAM"


UE_EVENT_KINDS = ("power_on", "power_off", "call_start", "call_end", "move")


@dataclass(frozen=True)
class UeEvent:
    kind: str
    dx: float = 0.0
    dy: float = 0.0

    def __post_init__(self):
        if self.kind not in UE_EVENT_KINDS:
            raise ProtocolError(f"unknown UE event {self.kind!r}")

    def __str__(self):
        if self.kind == "move":
            return f"move {self.dx!r} {self.dy!r}"
        return self.kind


@dataclass(frozen=True)
class UeNode:
    id: str
    pos: Position
    state: UeState = UeState.IDLE
    serving: Optional[str] = None
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.state is UeState.DETACHED and self.serving is not None:
            raise ProtocolError(f"{self.id}: a detached UE cannot have a serving cell")
        if self.state is UeState.ACTIVE and self.serving is None:
            raise ProtocolError(f"{self.id}: an active UE needs a serving cell")


@dataclass
class FapNode:
    site: FapSite
    mode: FapMode = FapMode.FIM
    attached_active: set = field(default_factory=set)
    wake_requesters: set = field(default_factory=set)
    pinned: bool = False  # always-on baseline; demand is never consulted

    @property
    def id(self) -> str:
        return self.site.id

    @property
    def pending_wake(self) -> bool:
        return bool(self.wake_requesters)


@dataclass
class FgwRegistry:
    active_fap_list: set = field(default_factory=set)
    neighbor_rss: dict = field(default_factory=dict)  # fap id -> (strongest FAM neighbor dBm or None, tick)
    ue_distance: dict = field(default_factory=dict)  # ue id -> (serving fap id, distance m, tick)


# Handover decisions


@dataclass(frozen=True)
class NoAction:
    pass


@dataclass(frozen=True)
class WakeTarget:
    fap: str


@dataclass(frozen=True)
class Execute:
    source: str
    target: str


@dataclass(frozen=True)
class Abort:
    source: str
    target: str


HandoverDecision = Union[NoAction, WakeTarget, Execute, Abort]


@dataclass(frozen=True)
class HandoverPolicy:
    wake_margin: float = 2.0
    link_down: frozenset = frozenset()
    existing: bool = False

    def wake_radius(self, site: FapSite) -> float:
        return site.radius_m + self.wake_margin


@dataclass(frozen=True)
class EventRecord:
    tick: int
    entity: str
    old: str
    new: str
    cause: str

    def to_line(self) -> str:
        return f"{self.tick}\t{self.entity}\t{self.old}\t{self.new}\t{self.cause}"


# Pure protocol operations


def ue_event(ue: UeNode, event: UeEvent, camp: str = MACRO) -> UeNode:
    """Apply one UE event and return the updated node.

    ``camp`` is the cell an idle UE camps on after power-on.
    """
    kind, state = event.kind, ue.state
    if kind == "move":
        return replace(ue, pos=ue.pos.moved(event.dx, event.dy))
    if kind == "power_on":
        if state is not UeState.DETACHED:
            raise ProtocolError(f"{ue.id}: power_on while {state.value}")
        return replace(ue, state=UeState.IDLE, serving=camp)
    if kind == "power_off":
        if state is UeState.DETACHED:
            raise ProtocolError(f"{ue.id}: power_off while already detached")
        return replace(ue, state=UeState.DETACHED, serving=None)
    if kind == "call_start":
        if state is not UeState.IDLE:
            raise ProtocolError(f"{ue.id}: call_start while {state.value}")
        return replace(ue, state=UeState.ACTIVE, serving=ue.serving or camp)
    # call_end
    if state is not UeState.ACTIVE:
        raise ProtocolError(f"{ue.id}: call_end while {state.value}")
    return replace(ue, state=UeState.IDLE)


def demand(fap: FapNode) -> bool:
    return bool(fap.attached_active) or fap.pending_wake


def settle_fap_mode(fap: FapNode, registry: FgwRegistry) -> tuple[FapNode, FgwRegistry]:
    """Bring the FAP mode in line with its demand and register the result."""
    if fap.pinned:
        fap.mode = FapMode.FAM
    else:
        fap.mode = FapMode.FAM if demand(fap) else FapMode.FIM
    if fap.mode is FapMode.FAM:
        registry.active_fap_list.add(fap.id)
    else:
        registry.active_fap_list.discard(fap.id)
    return fap, registry


@dataclass(frozen=True)
class LinkSnapshot:
    """Downlink powers seen by one UE, as if every FAP transmitted fully."""

    pos: Position
    rx_mw: dict  # fap id -> mW
    dist_m: dict  # fap id -> horizontal distance, m
    macro_rx_mw: float


def link_snapshot(pos: Position, layout: Layout, cfg: RadioConfig) -> LinkSnapshot:
    base = 20.0 * math.log10(cfg.f_ue) + radio.PATH_LOSS_OFFSET_DB
    rx, dist = {}, {}
    for site in layout.sites:
        d = horizontal_distance(pos, site.pos)
        walls = walls_between(pos, site, layout.fap_spacing_m)
        loss = (base + cfg.n_coeff * math.log10(max(d, MIN_LINK_DISTANCE_M))
                + radio.WALL_LOSS_COEFF_DB * walls * walls)
        rx[site.id] = cfg.p0_fap * 10.0 ** (-loss / 10.0)
        dist[site.id] = d
    return LinkSnapshot(pos, rx, dist, radio.macro_received_power(cfg))


def cell_snir(cell: str, snap: LinkSnapshot, active: set, cfg: RadioConfig) -> float:
    """Linear SNIR the UE would see from ``cell`` given the current FAM set."""
    if cell == MACRO:
        leak = cfg.macro_coupling * sum(snap.rx_mw[f] for f in sorted(active))
        return radio.snir_linear(snap.macro_rx_mw, radio.InterferenceBreakdown(i_macro_mw=leak),
                                 cfg.noise_power)
    i_active = 0.0
    i_idle = 0.0
    for f, p in snap.rx_mw.items():
        if f == cell:
            continue
        if f in active:
            i_active += p
        else:
            i_idle += p
    breakdown = radio.InterferenceBreakdown(i_active, cfg.beacon_duty * i_idle,
                                            radio.macro_interference(cfg))
    return radio.snir_linear(snap.rx_mw[cell], breakdown, cfg.noise_power)


def evaluate_handover(ue: UeNode, layout: Layout, registry: FgwRegistry, cfg: RadioConfig,
                      snap: LinkSnapshot, policy: HandoverPolicy = HandoverPolicy(),
                      wake_pending: Optional[dict] = None) -> HandoverDecision:
    """Decide the next handover step for one active UE.

    ``wake_pending`` maps FAP id to the UEs that already asked to wake it;
    a UE does not repeat a wake request it has outstanding.
    """
    if ue.state is not UeState.ACTIVE:
        raise ProtocolError(f"{ue.id}: handover evaluated for a {ue.state.value} UE")
    active = registry.active_fap_list
    wake_pending = wake_pending or {}

    # Demand creation: approaching the edge of an idle FAP wakes it.
    if not policy.existing:
        near_idle = sorted(
            (snap.dist_m[s.id], i, s.id) for i, s in enumerate(layout.sites)
            if s.id not in active and s.id != ue.serving
            and snap.dist_m[s.id] < policy.wake_radius(s)
            and ue.id not in wake_pending.get(s.id, ()))
        if near_idle:
            return WakeTarget(near_idle[0][2])

    candidates = {s.id: radio.db_from_linear(cell_snir(s.id, snap, active, cfg))
                  for s in layout.sites
                  if s.id in active and s.id != ue.serving
                  and snap.dist_m[s.id] < policy.wake_radius(s)}
    serving_db = macro_db = None
    if ue.serving != MACRO:
        serving_db = radio.db_from_linear(cell_snir(ue.serving, snap, active, cfg))
        macro_db = radio.db_from_linear(cell_snir(MACRO, snap, active, cfg))
    return decide_handover(ue.serving, serving_db, candidates, macro_db, cfg, policy.link_down)


def decide_handover(serving: str, serving_snir_db: Optional[float], candidates: dict,
                    macro_snir_db: Optional[float], cfg: RadioConfig,
                    link_down=frozenset()) -> HandoverDecision:
    """Threshold rule behind :func:`evaluate_handover`.

    ``candidates`` maps FAM FAP ids near the UE to their SNIR (dB), in
    layout order; ties on SNIR go to the earlier FAP.  A femto-served UE
    leaves below ``gamma_outer`` and only enters a target at or above
    ``gamma_inner``.  A macro-served UE moves to the best nearby FAM FAP as
    soon as that FAP clears ``gamma_inner``.  The macro cell is the
    fallback when no FAM FAP is nearby.
    """
    best = None
    if candidates:
        order = {f: i for i, f in enumerate(candidates)}
        best = max(candidates, key=lambda f: (candidates[f], -order[f]))

    if serving == MACRO:
        if best is None:
            return NoAction()
        if candidates[best] >= cfg.gamma_inner and best not in link_down:
            return Execute(MACRO, best)
        return Abort(MACRO, best)

    if serving_snir_db >= cfg.gamma_outer:
        return NoAction()
    if best is None:
        if macro_snir_db is not None and macro_snir_db >= cfg.gamma_inner:
            return Execute(serving, MACRO)
        return Abort(serving, MACRO)
    links_ok = best not in link_down and serving not in link_down
    if candidates[best] >= cfg.gamma_inner and links_ok:
        return Execute(serving, best)
    return Abort(serving, best)


def camp_cell(layout: Layout, pos: Position) -> str:
    """Nearest FAP covering ``pos``; the macro cell otherwise."""
    best = None
    for i, s in enumerate(layout.sites):
        d = horizontal_distance(pos, s.pos)
        if d <= s.radius_m and (best is None or (d, i) < best[:2]):
            best = (d, i, s.id)
    return best[2] if best else MACRO


# Stateful network


class Network:
    """Mutable world state: FAP and UE nodes, the FGW registry and the event log."""

    def __init__(self, layout: Layout, cfg: RadioConfig, ues=(),
                 policy: HandoverPolicy = HandoverPolicy()):
        self.layout = layout
        self.cfg = cfg
        self.policy = policy
        self.tick = 0
        self.faps: dict[str, FapNode] = {
            s.id: FapNode(s, FapMode.FAM if policy.existing else FapMode.FIM,
                          pinned=policy.existing)
            for s in layout.sites}
        self.registry = FgwRegistry()
        self.ues: dict[str, UeNode] = {}
        self.log: list[EventRecord] = []
        self.handovers = 0
        self.aborts = 0
        self.fam_ticks = 0
        self.fap_ticks = 0
        self._last_abort: dict[str, Abort] = {}
        for ue in ues:
            if ue.id in self.ues:
                raise ProtocolError(f"duplicate UE id {ue.id!r}")
            if ue.serving not in (None, MACRO) and ue.serving not in self.faps:
                raise ProtocolError(f"{ue.id}: unknown serving cell {ue.serving!r}")
            self.ues[ue.id] = ue
            if ue.state is UeState.ACTIVE and ue.serving != MACRO:
                self.faps[ue.serving].attached_active.add(ue.id)
        for fap in self.faps.values():
            if fap.pinned:
                self.registry.active_fap_list.add(fap.id)
        self.settle_all()

    def record(self, entity, old, new, cause):
        self.log.append(EventRecord(self.tick, entity, old, new, cause))

    def camp_cell(self, pos: Position) -> str:
        return camp_cell(self.layout, pos)

    def settle(self, fap_id: str):
        fap = self.faps[fap_id]
        old = fap.mode
        settle_fap_mode(fap, self.registry)
        if fap.mode is not old:
            cause = "demand" if fap.mode is FapMode.FAM else "no_demand"
            self.record(fap_id, old.value, fap.mode.value, cause)

    def settle_all(self):
        for fap_id in self.faps:
            self.settle(fap_id)

    def apply_ue_event(self, ue_id: str, event: UeEvent):
        try:
            old = self.ues[ue_id]
        except KeyError:
            raise ProtocolError(f"event for unknown UE {ue_id!r}") from None
        new = ue_event(old, event, camp=self.camp_cell(old.pos))
        self._detach_active(old)
        if new.state is UeState.ACTIVE and new.serving != MACRO:
            self.faps[new.serving].attached_active.add(ue_id)
        if new.state is not UeState.ACTIVE:
            self._drop_wake_requests(ue_id)
        self.ues[ue_id] = new
        if new.state is not old.state:
            self.record(ue_id, old.state.value, new.state.value, event.kind)

    def _detach_active(self, ue: UeNode):
        if ue.state is UeState.ACTIVE and ue.serving != MACRO:
            self.faps[ue.serving].attached_active.discard(ue.id)

    def _drop_wake_requests(self, ue_id: str):
        for fap in self.faps.values():
            fap.wake_requesters.discard(ue_id)

    def set_position(self, ue_id: str, pos: Position):
        self.ues[ue_id] = replace(self.ues[ue_id], pos=pos)

    def recamp_idle(self):
        """Idle UEs silently follow the best covering cell."""
        for ue_id, ue in self.ues.items():
            if ue.state is UeState.IDLE:
                cell = self.camp_cell(ue.pos)
                if cell != ue.serving:
                    self.ues[ue_id] = replace(ue, serving=cell)

    def prune_wake_requests(self):
        """Withdraw wake requests whose requester no longer needs the FAP."""
        for fap in self.faps.values():
            if not fap.wake_requesters:
                continue
            radius = self.policy.wake_radius(fap.site)
            keep = set()
            for ue_id in fap.wake_requesters:
                ue = self.ues.get(ue_id)
                if (ue is not None and ue.state is UeState.ACTIVE and ue.serving != fap.id
                        and horizontal_distance(ue.pos, fap.site.pos) < radius):
                    keep.add(ue_id)
            fap.wake_requesters = keep

    def snapshot_for(self, ue: UeNode) -> LinkSnapshot:
        return link_snapshot(ue.pos, self.layout, self.cfg)

    def evaluate(self, ue_id: str) -> HandoverDecision:
        ue = self.ues[ue_id]
        pending = {f.id: f.wake_requesters for f in self.faps.values() if f.wake_requesters}
        return evaluate_handover(ue, self.layout, self.registry, self.cfg,
                                 self.snapshot_for(ue), self.policy, pending)

    def apply_decision(self, ue_id: str, decision: HandoverDecision):
        if isinstance(decision, Abort):
            if self._last_abort.get(ue_id) != decision:
                self.record(ue_id, decision.source, decision.target, "Abort")
                self.aborts += 1
            self._last_abort[ue_id] = decision
            return
        self._last_abort.pop(ue_id, None)
        if isinstance(decision, WakeTarget):
            self.faps[decision.fap].wake_requesters.add(ue_id)
            self.record(ue_id, self.ues[ue_id].serving, decision.fap, "WakeTarget")
        elif isinstance(decision, Execute):
            apply_handover(decision, self, ue_id)

    def energy_duty(self) -> float:
        """Fraction of FAP-ticks spent in FAM so far."""
        return self.fam_ticks / self.fap_ticks if self.fap_ticks else 0.0

    def account_energy(self):
        self.fap_ticks += len(self.faps)
        self.fam_ticks += sum(f.mode is FapMode.FAM for f in self.faps.values())


def apply_handover(decision: Execute, net: Network, ue_id: str) -> Network:
    """Move ``ue_id`` from the source to the target cell in one step."""
    if not isinstance(decision, Execute):
        raise ProtocolError(f"apply_handover needs an Execute decision, got {decision!r}")
    s, t = decision.source, decision.target
    ue = net.ues[ue_id]
    if ue.state is not UeState.ACTIVE or ue.serving != s:
        raise ProtocolError(f"{ue_id}: handover from {s} but UE is {ue.state.value} on {ue.serving}")
    if t != MACRO and net.faps[t].mode is not FapMode.FAM:
        raise ProtocolError(f"tick {net.tick}: handover of {ue_id} into {t} while it is in FIM")
    net._detach_active(ue)
    net.ues[ue_id] = replace(ue, serving=t)
    if t != MACRO:
        net.faps[t].attached_active.add(ue_id)
        net.faps[t].wake_requesters.discard(ue_id)
    net.handovers += 1
    net.record(ue_id, s, t, "Execute")
    if s != MACRO:
        net.settle(s)
    return net


def fgw_share(registry: FgwRegistry, net: Network, tick: int) -> FgwRegistry:
    """Refresh the FGW's monitoring reports from every FAM FAP.

    FIM FAPs only beacon and are not polled, so their reports are dropped.
    """
    active = [f for f in net.layout.sites if f.id in registry.active_fap_list]
    rss = {}
    base = 20.0 * math.log10(net.cfg.f_ue) + radio.PATH_LOSS_OFFSET_DB
    for site in active:
        best = None
        for other in active:
            if other.id == site.id:
                continue
            d = max(horizontal_distance(site.pos, other.pos), MIN_LINK_DISTANCE_M)
            walls = walls_between(site.pos, other, net.layout.fap_spacing_m)
            loss = base + net.cfg.n_coeff * math.log10(d) + radio.WALL_LOSS_COEFF_DB * walls * walls
            dbm = 10.0 * math.log10(net.cfg.p0_fap) - loss
            best = dbm if best is None else max(best, dbm)
        rss[site.id] = (best, tick)
    registry.neighbor_rss = rss
    reports = {}
    for ue_id in sorted(net.ues):
        ue = net.ues[ue_id]
        if ue.state is UeState.ACTIVE and ue.serving in registry.active_fap_list:
            site = net.layout.site(ue.serving)
            reports[ue_id] = (ue.serving, horizontal_distance(ue.pos, site.pos), tick)
    registry.ue_distance = reports
    return registry


def check_invariants(net: Network) -> None:
    """Raise :class:`ProtocolError` if a settled network breaks a protocol invariant."""
    for fap in net.faps.values():
        if fap.pinned:
            if fap.mode is not FapMode.FAM:
                raise ProtocolError(f"tick {net.tick}: pinned {fap.id} left FAM")
        elif (fap.mode is FapMode.FAM) != demand(fap):
            raise ProtocolError(f"tick {net.tick}: {fap.id} mode {fap.mode.value} "
                                f"but demand={demand(fap)}")
        for ue_id in fap.attached_active:
            ue = net.ues.get(ue_id)
            if ue is None or ue.state is not UeState.ACTIVE or ue.serving != fap.id:
                raise ProtocolError(f"tick {net.tick}: {fap.id} lists {ue_id} as active")
    if net.registry.active_fap_list != {f.id for f in net.faps.values() if f.mode is FapMode.FAM}:
        raise ProtocolError(f"tick {net.tick}: FGW active list out of sync")
    for ue in net.ues.values():
        if ue.state is UeState.ACTIVE:
            if ue.serving is None:
                raise ProtocolError(f"tick {net.tick}: active {ue.id} has no serving cell")
            if ue.serving != MACRO:
                fap = net.faps[ue.serving]
                if fap.mode is not FapMode.FAM:
                    raise ProtocolError(f"tick {net.tick}: active {ue.id} served by FIM {fap.id}")
                if ue.id not in fap.attached_active:
                    raise ProtocolError(f"tick {net.tick}: {ue.id} missing from {fap.id}")
            holders = [f.id for f in net.faps.values() if ue.id in f.attached_active]
            if len(holders) > 1:
                raise ProtocolError(f"tick {net.tick}: {ue.id} attached to {holders}")
        elif ue.state is UeState.DETACHED and ue.serving is not None:
            raise ProtocolError(f"tick {net.tick}: detached {ue.id} still has a serving cell")
    for (_, _, t) in net.registry.ue_distance.values():
        if t > net.tick:
            raise ProtocolError("FGW report from the future")
