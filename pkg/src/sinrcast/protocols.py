"""Store-and-forward broadcast protocols over the abstract layer.

Every node keeps a FIFO of message ids it still has to re-broadcast and a
set of ids it has ever delivered. A message counts as delivered at a node
the moment it first shows up there, whether through a local arrival from
the environment or a reception event; each node re-broadcasts each id
exactly once. The single-source flavor is the same machine with one
arrival injected at the origin at slot zero.

Aborted re-broadcasts stay at the queue head and are retried at the next
boundary the node observes (another arrival or an ack); nothing here
issues aborts on its own.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .engine import Engine, Trace
from .graphs import strong_graph
from .mac import MacAutomaton, MacPlan, validate_event_log
from .model import SinrParams, Topology

__all__ = [
    "ProtocolRun",
    "RelayAutomaton",
    "check_protocol_invariants",
    "run_multi_source",
    "run_single_source",
]


class RelayAutomaton(MacAutomaton):
    """Re-broadcast every newly seen message id exactly once, in FIFO order."""

    def __init__(self, node_id, plan, seed, allowed_origins=None):
        super().__init__(node_id, plan, seed, allowed_origins=allowed_origins)
        self.queue: deque = deque()
        self.seen: set = set()
        self.delivered: List[Tuple[int, Any]] = []
        self.payloads: Dict[Any, Any] = {}

    def on_env_input(self, slot: int, value: Any) -> None:
        if isinstance(value, tuple) and value and value[0] == "arrive":
            self._deliver(slot, value[1], value[2])
            return
        super().on_env_input(slot, value)

    def handle_rcv(self, slot: int, origin: int, mid: Any, payload: Any) -> None:
        self._deliver(slot, mid, payload)

    def handle_ack(self, slot: int, mid: Any) -> None:
        head = self.queue.popleft()
        if head != mid:
            raise AssertionError(f"acked {mid!r} but queue head was {head!r}")
        self._pump(slot)

    def handle_abort(self, slot: int, mid: Any) -> None:
        # head stays queued; the next boundary retries it
        self._pump(slot)

    def _deliver(self, slot: int, mid: Any, payload: Any) -> None:
        if mid in self.seen:
            return
        self.seen.add(mid)
        self.delivered.append((slot, mid))
        self.payloads[mid] = payload
        self.queue.append(mid)
        self._pump(slot)

    def _pump(self, slot: int) -> None:
        if not self.busy and self.queue:
            mid = self.queue[0]
            self.begin_broadcast(slot, mid, self.payloads[mid])


@dataclass
class ProtocolRun:
    """Outcome of one relay-broadcast run."""

    automata: List[RelayAutomaton]
    trace: Trace
    arrivals: List[Tuple[int, int, Any]]  # (slot, node, mid)

    def delivered_nodes(self, mid: Any) -> frozenset:
        return frozenset(
            a.node_id for a in self.automata if mid in a.seen
        )

    def delivery_slot(self, node: int, mid: Any) -> Optional[int]:
        for slot, got in self.automata[node].delivered:
            if got == mid:
                return slot
        return None

    def completion_slot(self, mid: Any) -> Optional[int]:
        """Slot by which every node has the message, None if any is missing."""
        slots = []
        for a in self.automata:
            got = self.delivery_slot(a.node_id, mid)
            if got is None:
                return None
            slots.append(got)
        return max(slots)

    def mids(self) -> List[Any]:
        return [mid for _, _, mid in self.arrivals]


def check_protocol_invariants(run: ProtocolRun) -> None:
    """Structural checks every relay run must satisfy, regardless of luck."""
    for a in run.automata:
        assert set(a.queue) <= a.seen, f"node {a.node_id} queued an unseen id"
        mids = [mid for _, mid in a.delivered]
        assert len(mids) == len(set(mids)), f"node {a.node_id} delivered a dupe"
        own_bcasts = [e for e in a.events if e.kind == "bcast"]
        per_mid = [e.mid for e in own_bcasts]
        assert len(per_mid) == len(set(per_mid)), (
            f"node {a.node_id} re-broadcast an id twice"
        )
        assert set(per_mid) <= a.seen
        validate_event_log(a.events, a.plan.guarantees)


def _allowed_map(topo: Topology, params: SinrParams, plan: MacPlan):
    if not plan.params.rcv_filter_strong_only:
        return {v: None for v in topo.ids}
    g = strong_graph(topo, params)
    return {v: set(g.neighbors(v)) for v in topo.ids}


def run_multi_source(
    topo: Topology,
    params: SinrParams,
    plan: MacPlan,
    arrivals: Sequence[Tuple[int, int, Any, Any]],
    seed: int,
    max_slots: int,
    record_slots: bool = True,
) -> ProtocolRun:
    """Run the relay protocol with messages arriving per (slot, node, mid, payload)."""
    mids = [mid for _, _, mid, _ in arrivals]
    if len(mids) != len(set(mids)):
        raise ValueError("message ids must be unique across arrivals")
    allowed = _allowed_map(topo, params, plan)
    autos = [
        RelayAutomaton(v, plan, seed, allowed_origins=allowed[v]) for v in topo.ids
    ]
    env: Dict[int, list] = {}
    for slot, node, mid, payload in arrivals:
        env.setdefault(slot, []).append((node, ("arrive", mid, payload)))
    eng = Engine(
        topo,
        params,
        autos,
        max_slots=max_slots,
        env_schedule=env,
        record_slots=record_slots,
    )
    trace = eng.run()
    return ProtocolRun(
        automata=autos,
        trace=trace,
        arrivals=[(slot, node, mid) for slot, node, mid, _ in arrivals],
    )


def run_single_source(
    topo: Topology,
    params: SinrParams,
    plan: MacPlan,
    source: int,
    payload: Any,
    seed: int,
    max_slots: int,
    mid: Any = "msg0",
    record_slots: bool = True,
) -> ProtocolRun:
    """Single message injected at the source at slot zero, relayed everywhere."""
    return run_multi_source(
        topo,
        params,
        plan,
        [(0, source, mid, payload)],
        seed,
        max_slots,
        record_slots=record_slots,
    )
