"""Deterministic slot-synchronous radio engine.

Each slot runs three stages in a fixed order: environment inputs are
delivered first, then every automaton picks an action for the slot, then
receptions are resolved under the decoding test. All per-stage iteration is
in ascending node id, so a run is a pure function of topology, parameters,
automata behavior, and the seeds the automata were built with.

A transmitter is decodable at a listener only if it beats the threshold
against everyone else's interference; with a decoding threshold above 1
that transmitter is necessarily the strongest one heard, so resolution only
has to test the argmax candidate. Dormant nodes cannot transmit but are
woken by a decodable transmission at the next slot boundary.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .model import (
    BOUNDARY_RTOL,
    NodeId,
    SinrParams,
    Topology,
    gain_matrix,
    received_from,
)


class Transmit:
    """Send a payload this slot. The sender hears nothing (half duplex)."""

    __slots__ = ("payload",)

    def __init__(self, payload: Any):
        self.payload = payload

    def __repr__(self) -> str:
        return f"Transmit({self.payload!r})"


class _Listen:
    __slots__ = ()

    def __repr__(self) -> str:
        return "Listen"


class _Sleep:
    __slots__ = ()

    def __repr__(self) -> str:
        return "Sleep"


# listening is the default posture; sleeping means deaf for the slot
LISTEN = _Listen()
SLEEP = _Sleep()
SlotAction = Any  # Transmit instance, LISTEN, or SLEEP


class NodeAutomaton:
    """Base class for per-node behavior; override what you need.

    `done` is polled after every slot; the run stops early once every
    automaton reports done.
    """

    done: bool = False

    def on_wake(self, slot: int) -> None:
        pass

    def on_slot(self, slot: int) -> SlotAction:
        return LISTEN

    def on_receive(self, slot: int, payload: Any) -> None:
        pass

    def on_env_input(self, slot: int, value: Any) -> None:
        pass


def per_node_rng(master_seed: int, node_id: NodeId, stream_tag: str = "") -> np.random.Generator:
    """Independent generator for (seed, node, purpose), stable across runs.

    The tag is hashed so distinct purposes get well-separated streams even
    when their names are similar.
    """
    if master_seed < 0 or node_id < 0:
        raise ValueError("seed and node id must be non-negative")
    tag_int = int.from_bytes(
        hashlib.blake2s(stream_tag.encode("utf-8"), digest_size=8).digest(), "big"
    )
    return np.random.default_rng(np.random.SeedSequence([master_seed, node_id, tag_int]))


def describe_payload(payload: Any) -> Any:
    """JSON-able rendering of a payload for traces."""
    to_trace = getattr(payload, "to_trace", None)
    if callable(to_trace):
        return to_trace()
    if isinstance(payload, (str, int, float, bool)) or payload is None:
        return payload
    return repr(payload)


@dataclass
class SlotRecord:
    slot: int
    tx: List[Tuple[NodeId, Any]]
    rx: List[Tuple[NodeId, NodeId]]
    env: List[Tuple[NodeId, Any]]
    wake: List[NodeId]


@dataclass
class Trace:
    """Everything observable about one run.

    The JSONL export writes a meta line, one line per recorded slot, and a
    closing line; the text summary prints the aggregate counters in a fixed
    order (slots, transmissions, receptions, env inputs, wakes, faults,
    completed).
    """

    meta: Dict[str, Any]
    slots: List[SlotRecord] = field(default_factory=list)
    faults: List[str] = field(default_factory=list)
    slots_executed: int = 0
    tx_count: int = 0
    rx_count: int = 0
    env_count: int = 0
    wake_count: int = 0
    completed_all: bool = False

    def jsonl_lines(self) -> List[str]:
        def enc(obj: Any) -> str:
            return json.dumps(obj, sort_keys=True, separators=(",", ":"))

        lines = [enc({"type": "meta", **self.meta})]
        for rec in self.slots:
            lines.append(
                enc(
                    {
                        "type": "slot",
                        "slot": rec.slot,
                        "tx": [[v, describe_payload(p)] for v, p in rec.tx],
                        "rx": [[u, v] for u, v in rec.rx],
                        "env": [[v, describe_payload(x)] for v, x in rec.env],
                        "wake": list(rec.wake),
                    }
                )
            )
        lines.append(
            enc(
                {
                    "type": "end",
                    "slots": self.slots_executed,
                    "faults": self.faults,
                    "completed": self.completed_all,
                }
            )
        )
        return lines

    def write_jsonl(self, path: str) -> None:
        with open(path, "w") as f:
            for line in self.jsonl_lines():
                f.write(line + "\n")

    def summary_text(self) -> str:
        return (
            f"slots={self.slots_executed} tx={self.tx_count} rx={self.rx_count} "
            f"env={self.env_count} wakes={self.wake_count} "
            f"faults={len(self.faults)} completed={self.completed_all}"
        )


class Engine:
    """Runs a set of automata over a shared topology for up to max_slots."""

    def __init__(
        self,
        topology: Topology,
        params: SinrParams,
        automata: Sequence[NodeAutomaton],
        max_slots: int,
        env_schedule: Optional[Dict[int, List[Tuple[NodeId, Any]]]] = None,
        dormant: Iterable[NodeId] = (),
        record_slots: bool = True,
        meta: Optional[Dict[str, Any]] = None,
    ):
        if len(automata) != topology.n:
            raise ValueError("need exactly one automaton per node")
        if max_slots <= 0:
            raise ValueError("max_slots must be positive")
        self.topology = topology
        self.params = params
        self.automata = list(automata)
        self.max_slots = max_slots
        self.env_schedule = {
            t: sorted(items) for t, items in (env_schedule or {}).items()
        }
        self.dormant = set(dormant)
        for v in self.dormant:
            topology._check_id(v)
        self.record_slots = record_slots
        self.meta = dict(meta or {})
        self._gain = gain_matrix(topology, params)
        self._thresh = params.beta * (1.0 - BOUNDARY_RTOL)
        # with beta this close to 1 the argmax shortcut is not airtight;
        # fall back to checking every transmitter
        self._strict = self._thresh > 1.0

    def run(self) -> Trace:
        trace = Trace(meta=self.meta)
        n = self.topology.n
        auto = self.automata
        dormant = set(self.dormant)
        pending_wake: List[Tuple[NodeId, Any]] = []
        noise = self.params.noise

        for t in range(self.max_slots):
            wakes: List[NodeId] = []
            env_rec: List[Tuple[NodeId, Any]] = []

            # stage 0: wakes earned by last slot's receptions
            if pending_wake:
                for v, payload in pending_wake:
                    dormant.discard(v)
                    auto[v].on_wake(t)
                    wakes.append(v)
                    auto[v].on_receive(t, payload)
                pending_wake = []

            # stage 1: environment inputs
            for v, value in self.env_schedule.get(t, ()):
                if v in dormant:
                    dormant.discard(v)
                    auto[v].on_wake(t)
                    wakes.append(v)
                auto[v].on_env_input(t, value)
                env_rec.append((v, value))
                trace.env_count += 1

            # stage 2: collect actions
            senders: List[NodeId] = []
            payloads: Dict[NodeId, Any] = {}
            listeners: List[NodeId] = []
            passive: List[NodeId] = []
            fault = None
            for v in range(n):
                act = auto[v].on_slot(t)
                if v in dormant:
                    if isinstance(act, Transmit):
                        fault = f"slot {t}: dormant node {v} attempted to transmit"
                        break
                    passive.append(v)
                elif isinstance(act, Transmit):
                    senders.append(v)
                    payloads[v] = act.payload
                elif act is SLEEP:
                    pass
                else:
                    listeners.append(v)
            if fault is not None:
                trace.faults.append(fault)
                trace.slots_executed = t + 1
                if self.record_slots:
                    trace.slots.append(SlotRecord(t, [], [], env_rec, wakes))
                return trace

            # stage 3: resolve receptions
            rx: List[Tuple[NodeId, NodeId]] = []
            if senders:
                hearers = listeners + passive
                if hearers:
                    for u, w in self._resolve(hearers, senders, noise):
                        rx.append((u, w))
                        if u in dormant:
                            pending_wake.append((u, payloads[w]))
                        else:
                            auto[u].on_receive(t, payloads[w])
                pending_wake.sort()
                trace.tx_count += len(senders)
                trace.rx_count += len(rx)

            if self.record_slots:
                trace.slots.append(
                    SlotRecord(
                        t,
                        [(v, payloads[v]) for v in senders],
                        rx,
                        env_rec,
                        wakes,
                    )
                )
            trace.slots_executed = t + 1

            if all(a.done for a in auto):
                trace.completed_all = True
                break

        return trace

    def _resolve(
        self, hearers: List[NodeId], senders: List[NodeId], noise: float
    ) -> List[Tuple[NodeId, NodeId]]:
        """(listener, transmitter) pairs that decode this slot, id-ascending."""
        if not self._strict:
            out = []
            for u in sorted(hearers):
                w = received_from(u, senders, self.topology, self.params)
                if w is not None:
                    out.append((u, w))
            return out
        hs = sorted(hearers)
        sub = self._gain[np.ix_(hs, senders)]
        tot = sub.sum(axis=1)
        best = sub.argmax(axis=1)
        rows = np.arange(len(hs))
        bg = sub[rows, best]
        ok = bg / (tot - bg + noise) >= self._thresh
        return [(hs[i], senders[int(best[i])]) for i in np.nonzero(ok)[0]]
