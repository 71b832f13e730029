"""Epoch machinery for approximate progress.

An epoch walks through a fixed number of levels. At each level the still
participating broadcasters discover which other participants they can hear
reliably, elect a sparse ruling subset of themselves over that estimated
neighborhood graph, and then everybody at the level fires a low-rate burst of
their broadcast payload before handing participation to the elected subset.
Density drops geometrically level by level, so by the last level the survivors
are spread far enough apart that their bursts land.

The module has three layers:

* parameter plumbing (:class:`ApprogParams`, :func:`plan_epoch`) that turns the
  model constants into concrete slot counts,
* a pure graph version of the ruling-set election (:func:`run_mis_on_graph`)
  used by tests and the oracle-substitution harness,
* the radio implementation (:class:`EpochMachine`) that runs the whole epoch
  over the slot engine, with acknowledged message rounds and dropouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import Engine, LISTEN, NodeAutomaton, Transmit, per_node_rng
from .graphs import Graph, GrowthBound, default_growth_bound
from .model import SinrParams, Topology, lambda_ratio, transmission_range
from .reliability import ReliabilityParams, calibrate_mu, reliability_graph

__all__ = [
    "ApprogParams",
    "EpochLayout",
    "EpochMachine",
    "EpochNodeAutomaton",
    "EpochRunResult",
    "MisRun",
    "OraclePhase",
    "approg_bound",
    "differing_bit_index",
    "epoch_run",
    "log_star",
    "mis_phase_update",
    "oracle_substitution_run",
    "plan_epoch",
    "run_mis_on_graph",
]


def log_star(x: float) -> int:
    """Iterated base-2 logarithm: how many times log2 gets x down to <= 1."""
    if x <= 0:
        raise ValueError("log_star needs a positive argument")
    steps = 0
    while x > 1:
        x = math.log2(x)
        steps += 1
    return steps


# ---------------------------------------------------------------------------
# ruling-set election (shared by the graph runner and the radio machine)

COMPETITOR = "competitor"
RULER = "ruler"
RULED = "ruled"
DOMINATOR = "dominator"
DOMINATED = "dominated"

_ABSORBED = (DOMINATOR, DOMINATED)


def differing_bit_index(a: int, b: int, width: int) -> int:
    """Position (from the top, 1-based) of the highest bit where a and b differ.

    Both values must fit in `width` bits and differ. The result lands in
    [1, width], which is what shrinks the competition value range phase over
    phase.
    """
    if a == b:
        raise ValueError("values must differ")
    if a < 0 or b < 0 or max(a, b) >= (1 << width):
        raise ValueError("values must fit in the given width")
    return width - ((a ^ b).bit_length() - 1)


def mis_phase_update(
    states: dict,
    rvals: dict,
    neighbors: Callable[[int], Sequence[int]],
    width: int,
) -> tuple[dict, dict]:
    """One synchronous phase of the ruling-set election on a full snapshot.

    Everyone reads the same (states, rvals) snapshot and moves at once:
    competitors with no competing neighbor, or with the strictly smallest
    value among them, promote to dominator and knock every non-absorbed
    neighbor down to dominated. Competitors tied for the minimum become
    rulers and freeze their competitor neighbors for the rest of the stage.
    Everyone else shrinks their value to the index of the highest bit where
    it differs from the local minimum.
    """
    new_states = dict(states)
    new_r = dict(rvals)
    promoted = []
    tied = []
    for v, st in states.items():
        if st != COMPETITOR:
            continue
        comp = [w for w in neighbors(v) if states[w] == COMPETITOR]
        if not comp:
            promoted.append(v)
            continue
        low = min(rvals[w] for w in comp)
        if rvals[v] < low:
            promoted.append(v)
        elif rvals[v] == low:
            tied.append(v)
        else:
            new_r[v] = differing_bit_index(rvals[v], low, width)
    for v in promoted:
        new_states[v] = DOMINATOR
        for w in neighbors(v):
            if new_states[w] not in _ABSORBED:
                new_states[w] = DOMINATED
    for v in tied:
        if new_states[v] != COMPETITOR:
            # a neighbor promoted in the same phase; it already dominated us
            continue
        new_states[v] = RULER
        for w in neighbors(v):
            if states[w] == COMPETITOR and new_states[w] == COMPETITOR:
                new_states[w] = RULED
    return new_states, new_r


@dataclass
class MisRun:
    """Outcome of a full graph-side election run."""

    selected: frozenset
    final_states: dict
    phase_history: list  # (stage, phase, frozenset of dominators so far)


def run_mis_on_graph(
    graph: Graph,
    labels: dict,
    label_range: int,
    stages: int = 4,
) -> MisRun:
    """Run the staged election on an explicit graph with known labels.

    Labels must lie in [0, label_range). Each stage resets every non-absorbed
    node to a competitor carrying its label, then runs log_star(label_range)+2
    synchronous phases. Independence of the dominator set is checked after
    every phase and violations raise, since that property is structural and a
    failure means the transition logic is wrong.
    """
    nodes = list(graph.nodes)
    if set(labels) != set(nodes):
        raise ValueError("labels must cover exactly the graph nodes")
    for v, lab in labels.items():
        if not 0 <= lab < label_range:
            raise ValueError(f"label {lab} of node {v} outside [0, {label_range})")
    width = max(1, math.ceil(math.log2(label_range)))
    phases = log_star(label_range) + 2
    states = {v: COMPETITOR for v in nodes}
    rvals = dict(labels)
    history = []
    for stage in range(stages):
        for v in nodes:
            if states[v] not in _ABSORBED:
                states[v] = COMPETITOR
                rvals[v] = labels[v]
        for phase in range(phases):
            states, rvals = mis_phase_update(states, rvals, graph.neighbors, width)
            doms = frozenset(v for v in nodes if states[v] == DOMINATOR)
            for v in doms:
                for w in graph.neighbors(v):
                    if w in doms:
                        raise AssertionError(
                            f"adjacent dominators {v} and {w} after stage {stage} phase {phase}"
                        )
            history.append((stage, phase, doms))
    selected = frozenset(v for v in nodes if states[v] == DOMINATOR)
    return MisRun(selected=selected, final_states=dict(states), phase_history=history)


# ---------------------------------------------------------------------------
# parameters and slot layout


@dataclass(frozen=True)
class ApprogParams:
    """Tunables for the epoch construction.

    The reliability triple (tx_prob, mu, gamma) matches ReliabilityParams.
    The remaining knobs scale the derived slot counts; defaults were fixed by
    calibration runs, see the project notes.
    """

    eps: float = 0.2
    tx_prob: float = 0.5
    mu: float = 0.2
    gamma: float = 0.8
    level_factor: float = 2.0
    min_levels: int = 4
    q_floor: int = 16
    q_factor: float = 1.0
    round_factor: float = 0.125
    label_exponent: float = 6.0
    stages: int = 4
    burst_factor: float = 4.0
    height_coeff: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        # reuse the reliability validation for the shared triple
        ReliabilityParams(p=self.tx_prob, mu=self.mu, gamma=self.gamma)
        if self.min_levels < 1 or self.stages < 0 or self.q_floor < 1:
            raise ValueError("level, stage and spread floors must be positive")
        for name in ("level_factor", "round_factor", "burst_factor", "height_coeff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def reliability(self) -> ReliabilityParams:
        return ReliabilityParams(p=self.tx_prob, mu=self.mu, gamma=self.gamma)


@dataclass(frozen=True)
class EpochLayout:
    """Concrete slot counts for one epoch, all derived in plan_epoch.

    Slot order inside a level: discovery block one (round_slots slots, label
    beacons), discovery block two (round_slots slots, neighbor lists), then
    rounds acknowledged message rounds of 2*round_slots slots each for the
    election, then burst_len burst slots. An epoch is `levels` such levels
    back to back.
    """

    levels: int
    round_slots: int
    rounds: int
    phases_per_stage: int
    stages: int
    burst_len: int
    q_spread: int
    label_range: int
    label_width: int
    heights: tuple
    entry_heights: tuple
    tx_prob: float
    mu: float
    gamma: float
    potential_cap: int

    @property
    def level_len(self) -> int:
        return 2 * self.round_slots + self.rounds * 2 * self.round_slots + self.burst_len

    @property
    def epoch_len(self) -> int:
        return self.levels * self.level_len

    @property
    def potential_threshold(self) -> float:
        return (1.0 - self.gamma / 2.0) * self.mu * self.round_slots

    def segment(self, offset: int) -> str:
        """Classify a within-level slot offset. Mostly a debugging aid."""
        t = self.round_slots
        if offset < t:
            return "beacon"
        if offset < 2 * t:
            return "lists"
        if offset < 2 * t + self.rounds * 2 * t:
            return "election"
        if offset < self.level_len:
            return "burst"
        raise ValueError("offset beyond level length")


def plan_epoch(
    params: ApprogParams,
    lam: float,
    alpha: float,
    growth: Optional[GrowthBound] = None,
) -> EpochLayout:
    """Turn the abstract parameters into a concrete epoch layout.

    lam is the ratio of the strong range to the minimum node spacing and
    drives every derived quantity. The growth bound defaults to the generic
    quadratic one for that ratio.
    """
    if lam < 1.0:
        raise ValueError("range ratio below one makes no sense here")
    if alpha <= 2.0:
        raise ValueError("path-loss exponent must exceed 2")
    if growth is None:
        growth = default_growth_bound(lam)
    levels = max(params.min_levels, math.ceil(params.level_factor * math.log2(max(lam, 1.0))))
    label_range = math.ceil(lam**params.label_exponent / params.eps)
    if label_range < math.ceil(lam * lam):
        raise AssertionError("label range must dominate the squared range ratio")
    label_range = max(label_range, 2)
    width = max(1, math.ceil(math.log2(label_range)))
    ls = log_star(label_range)

    # reception-height ladder, built from the top level down
    heights = [0] * (levels + 1)
    entries = [0] * (levels + 1)
    heights[levels] = 1
    entries[levels] = 1
    for phi in range(levels - 1, 0, -1):
        entries[phi] = 3 * heights[phi + 1]
        heights[phi] = entries[phi] + math.ceil(params.height_coeff * ls) + 1
    h1 = heights[1]
    if 3 ** (levels - 1) > h1:
        raise AssertionError("height ladder lost its geometric growth")

    t_slots = math.ceil(
        params.round_factor
        * math.log2(growth.evaluate(h1) / params.eps)
        / (params.gamma**2 * params.mu)
    )
    t_slots = max(t_slots, 1)
    q = max(params.q_floor, math.ceil(params.q_factor * math.log2(max(lam, 2.0)) ** alpha))
    burst_len = max(1, math.ceil(params.burst_factor * q * math.log2(1.0 / params.eps)))
    phases = ls + 2
    cap = math.ceil(1.0 / ((1.0 - params.gamma / 2.0) * params.mu))
    return EpochLayout(
        levels=levels,
        round_slots=t_slots,
        rounds=params.stages * phases,
        phases_per_stage=phases,
        stages=params.stages,
        burst_len=burst_len,
        q_spread=q,
        label_range=label_range,
        label_width=width,
        heights=tuple(heights[1:]),
        entry_heights=tuple(entries[1:]),
        tx_prob=params.tx_prob,
        mu=params.mu,
        gamma=params.gamma,
        potential_cap=cap,
    )


def approg_bound(layout: EpochLayout) -> int:
    """Worst-case progress bound: one full epoch, in epoch-clock slots."""
    return layout.epoch_len


# ---------------------------------------------------------------------------
# radio implementation


@dataclass
class _LevelState:
    """Per-level scratch. Rebuilt at every level boundary."""

    active: bool
    beacon_tx: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    list_tx: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    burst_tx: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    counts: dict = field(default_factory=dict)
    potential: tuple = ()
    confirmed: set = field(default_factory=set)
    state: str = COMPETITOR
    rval: int = 0
    phase_in_stage: int = 0
    round_msgs: dict = field(default_factory=dict)
    round_acks: set = field(default_factory=set)
    sent_this_round: bool = False
    pending_ack: Optional[int] = None


class EpochMachine:
    """One node's view of a single epoch, driven slot by slot.

    The machine is clocked with local slot indices 0 .. epoch_len-1 through
    act(), and told about receptions through hear(). It never touches the
    engine directly, so the abstract layer can interleave it with other
    traffic on its own clock.
    """

    def __init__(
        self,
        node_id: int,
        layout: EpochLayout,
        rng: np.random.Generator,
        message=None,
        participating: bool = False,
    ):
        if participating and message is None:
            raise ValueError("a participating node needs a broadcast payload")
        self.node_id = node_id
        self.layout = layout
        self.rng = rng
        self.message = message
        self.participating = participating
        self.label = int(rng.integers(0, layout.label_range)) if participating else -1
        self.dropped = False
        self.muzzled = False  # set externally when the payload is withdrawn
        self.latched = None  # (local_slot, origin, payload) once a burst lands
        self.burst_log = []  # every burst that landed, latched or not
        self.level_members = []  # True per level while this node was active
        self._level = -1
        self._lv: Optional[_LevelState] = None

    # -- internals ---------------------------------------------------------

    def _enter_level(self, level: int) -> None:
        self._level = level
        lay = self.layout
        if level == 0:
            active = self.participating
        else:
            prev = self._lv
            active = bool(prev and prev.active and prev.state == DOMINATOR)
        active = active and not self.dropped
        self.level_members.append(active)
        lv = _LevelState(active=active)
        if active:
            t = lay.round_slots
            lv.beacon_tx = self.rng.random(t) < lay.tx_prob
            lv.list_tx = self.rng.random(t) < lay.tx_prob
            lv.burst_tx = self.rng.random(lay.burst_len) < lay.tx_prob / lay.q_spread
            lv.rval = self.label
        self._lv = lv

    def _finish_round(self) -> None:
        """Apply dropout check and one election phase from this round's mail."""
        lv = self._lv
        lay = self.layout
        if not lv.active or self.dropped:
            lv.round_msgs = {}
            lv.round_acks = set()
            lv.sent_this_round = False
            return
        for lab in lv.confirmed:
            missing_msg = lab not in lv.round_msgs
            missing_ack = lv.sent_this_round and lab not in lv.round_acks
            if missing_msg or missing_ack:
                self.dropped = True
                break
        if not self.dropped and lv.state not in _ABSORBED:
            msgs = lv.round_msgs
            if any(st == DOMINATOR for st, _ in msgs.values()):
                lv.state = DOMINATED
            elif lv.state == COMPETITOR:
                if any(st == RULER for st, _ in msgs.values()):
                    lv.state = RULED
                else:
                    comp = [r for st, r in msgs.values() if st == COMPETITOR]
                    if not comp:
                        lv.state = DOMINATOR
                    else:
                        low = min(comp)
                        if lv.rval < low:
                            lv.state = DOMINATOR
                        elif lv.rval == low:
                            lv.state = RULER
                        else:
                            lv.rval = differing_bit_index(lv.rval, low, lay.label_width)
        lv.phase_in_stage += 1
        if lv.phase_in_stage >= lay.phases_per_stage:
            lv.phase_in_stage = 0
            if lv.state not in _ABSORBED:
                lv.state = COMPETITOR
                lv.rval = self.label
        lv.round_msgs = {}
        lv.round_acks = set()
        lv.sent_this_round = False

    def _finalize_potential(self) -> None:
        lv = self._lv
        thresh = self.layout.potential_threshold
        found = sorted(lab for lab, c in lv.counts.items() if c >= thresh)
        if len(found) > self.layout.potential_cap:
            raise AssertionError(
                f"{len(found)} potential neighbors exceed the structural cap "
                f"{self.layout.potential_cap}"
            )
        lv.potential = tuple(found)

    # -- slot interface ------------------------------------------------------

    def act(self, k: int):
        """Return a payload to transmit at local slot k, or None to listen."""
        lay = self.layout
        if not self.participating:
            return None
        level, offset = divmod(k, lay.level_len)
        if level != self._level:
            self._enter_level(level)
        lv = self._lv
        t = lay.round_slots
        if offset < t:
            if lv.active and lv.beacon_tx[offset]:
                return ("label", self.label)
            return None
        if offset == t:
            if lv.active:
                self._finalize_potential()
        if offset < 2 * t:
            if lv.active and lv.list_tx[offset - t]:
                return ("plist", self.label, lv.potential)
            return None
        rel = offset - 2 * t
        rounds_len = lay.rounds * 2 * t
        if rel < rounds_len:
            step, sub = divmod(rel % (2 * t), 2)
            if rel % (2 * t) == 0 and rel > 0:
                self._finish_round()
            if not lv.active or self.dropped:
                return None
            if sub == 0:
                if lv.beacon_tx[step]:
                    lv.sent_this_round = True
                    return ("round", self.label, lv.state, lv.rval)
                return None
            if lv.pending_ack is not None:
                target = lv.pending_ack
                lv.pending_ack = None
                return ("rcpt", self.label, target)
            return None
        if rel == rounds_len and lay.rounds > 0:
            self._finish_round()
        if lv.active and not self.dropped and not self.muzzled:
            j = rel - rounds_len
            if lv.burst_tx[j]:
                return ("burst", self.node_id, self.message)
        return None

    def hear(self, k: int, payload) -> None:
        """Record a reception that happened at local slot k."""
        if not isinstance(payload, tuple) or not payload:
            return
        kind = payload[0]
        if kind == "burst":
            self.burst_log.append((k, payload[1], payload[2]))
            if self.latched is None:
                self.latched = (k, payload[1], payload[2])
            return
        if not self.participating:
            return
        lay = self.layout
        level = k // lay.level_len
        if level != self._level:
            self._enter_level(level)
        lv = self._lv
        if not lv.active or self.dropped:
            return
        if kind == "label":
            lab = payload[1]
            lv.counts[lab] = lv.counts.get(lab, 0) + 1
        elif kind == "plist":
            lab, listed = payload[1], payload[2]
            if self.label in listed and lab in lv.potential:
                lv.confirmed.add(lab)
        elif kind == "round":
            lab = payload[1]
            if lab in lv.confirmed:
                lv.round_msgs[lab] = (payload[2], payload[3])
                lv.pending_ack = lab
        elif kind == "rcpt":
            acker, target = payload[1], payload[2]
            if target == self.label and acker in lv.confirmed:
                lv.round_acks.add(acker)

    def close_epoch(self) -> None:
        """Settle trailing state once the last slot has run."""
        if self.participating and self._lv is not None:
            while len(self.level_members) < self.layout.levels:
                self._enter_level(self._level + 1)


class EpochNodeAutomaton(NodeAutomaton):
    """Engine adapter running exactly one standalone epoch."""

    def __init__(self, machine: EpochMachine):
        self.machine = machine

    def on_slot(self, slot: int):
        payload = self.machine.act(slot)
        if slot >= self.machine.layout.epoch_len - 1:
            self.done = True
        if payload is None:
            return LISTEN
        return Transmit(payload)

    def on_receive(self, slot: int, payload) -> None:
        self.machine.hear(slot, payload)


@dataclass
class EpochRunResult:
    layout: EpochLayout
    latched: dict  # node id -> (slot, origin, payload) or None
    bursts: dict  # node id -> list of every (slot, origin, payload) that landed
    members: dict  # node id -> per-level activity flags
    dropped: dict  # node id -> bool
    trace: object


def epoch_run(
    topo: Topology,
    params: SinrParams,
    aparams: ApprogParams,
    initiators: dict,
    seed: int,
    max_extra_slots: int = 0,
    layout: Optional[EpochLayout] = None,
    record_slots: bool = True,
) -> EpochRunResult:
    """Run one standalone epoch over a topology.

    initiators maps node id to the broadcast payload it carries; everyone
    else is a bare listener. Returns per-node latch results plus membership
    history for diagnostics.
    """
    if layout is None:
        lam = lambda_ratio(topo, params)
        layout = plan_epoch(aparams, lam, params.alpha)
    machines = {}
    automata = []
    for v in topo.ids:
        rng = per_node_rng(seed, v, "epoch")
        m = EpochMachine(
            v,
            layout,
            rng,
            message=initiators.get(v),
            participating=v in initiators,
        )
        machines[v] = m
        automata.append(EpochNodeAutomaton(m))
    eng = Engine(
        topo,
        params,
        automata,
        max_slots=layout.epoch_len + max_extra_slots,
        record_slots=record_slots,
    )
    trace = eng.run()
    for m in machines.values():
        m.close_epoch()
    return EpochRunResult(
        layout=layout,
        latched={v: m.latched for v, m in machines.items()},
        bursts={v: list(m.burst_log) for v, m in machines.items()},
        members={v: list(m.level_members) for v, m in machines.items()},
        dropped={v: m.dropped for v, m in machines.items()},
        trace=trace,
    )


# ---------------------------------------------------------------------------
# oracle-substitution harness


@dataclass
class OraclePhase:
    members: frozenset
    min_spacing: float
    cap: float
    mu_star: float
    edges: frozenset
    selected: frozenset


def _pair_min_spacing(topo: Topology, members) -> float:
    ids = sorted(members)
    best = math.inf
    for i, u in enumerate(ids):
        for v in ids[i + 1 :]:
            best = min(best, topo.distance(u, v))
    return best


def oracle_substitution_run(
    topo: Topology,
    params: SinrParams,
    aparams: ApprogParams,
    members,
    estimator_factory: Optional[Callable] = None,
    max_phases: Optional[int] = None,
) -> list:
    """Replay the level recursion with exact reliability oracles.

    Instead of radio discovery, each phase computes the true reliability graph
    over the surviving members, thresholded at the worst pair reliability
    within min(2 * current spacing, strong range). The election then runs on
    that graph with node ids as labels. Returns the per-phase records; the
    surviving set spreads out by at least the capped distance each phase,
    which the caller can assert.

    estimator_factory, if given, maps the current member set to a pairwise
    reliability estimator; interference comes only from the members still in
    play, so a fresh estimator is needed at every phase.
    """
    rel = aparams.reliability()
    ranges = transmission_range(params)
    members = frozenset(members)
    if len(members) < 2:
        raise ValueError("need at least two members to recurse on")
    if max_phases is None:
        lam = lambda_ratio(topo, params)
        max_phases = plan_epoch(aparams, lam, params.alpha).levels
    label_range = max(topo.ids) + 1
    phases = []
    current = members
    for _ in range(max_phases):
        if len(current) < 2:
            break
        spacing = _pair_min_spacing(topo, current)
        if spacing > ranges.strong:
            break
        cap = min(2.0 * spacing, ranges.strong)
        estimator = estimator_factory(current) if estimator_factory else None
        mu_star = calibrate_mu(
            topo, params, rel, cap, members=current, estimator=estimator
        )
        rel_params = ReliabilityParams(p=rel.p, mu=mu_star, gamma=rel.gamma)
        graph = reliability_graph(
            topo, params, rel_params, members=current, estimator=estimator
        )
        run = run_mis_on_graph(
            graph.subgraph(current),
            labels={v: v for v in current},
            label_range=label_range,
            stages=aparams.stages,
        )
        phases.append(
            OraclePhase(
                members=current,
                min_spacing=spacing,
                cap=cap,
                mu_star=mu_star,
                edges=frozenset(graph.edges()),
                selected=run.selected,
            )
        )
        if run.selected == current:
            break
        current = run.selected
    return phases
