"""Abstract broadcast layer combining acknowledgments with progress epochs.

Real slots are split by parity. Even slots run the probability-ramp
acknowledged broadcast for whatever message a node currently carries; odd
slots run the epoch machinery from :mod:`sinrcast.progress` on their own
half-speed clock. The layer surfaces four events per node:

* ``bcast``: the node accepted a message to broadcast,
* ``rcv``: first reception of some broadcast payload within the current
  epoch (re-deliveries in later epochs are separate events; callers that
  want exactly-once semantics dedup on the message id),
* ``ack``: fired exactly ``ack_window`` real slots after the bcast,
* ``abort``: the environment withdrew the message early; no ack follows.

An aborted node keeps servicing discovery and election rounds until the
epoch ends so its neighbors do not drop out, but it stops transmitting the
withdrawn payload immediately.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, List, Optional, Set

from .ack import AckParams, ack_bound, ack_init, ack_step, default_n_estimate
from .engine import LISTEN, NodeAutomaton, SlotAction, Transmit, per_node_rng
from .graphs import strong_graph
from .model import SinrParams, Topology, lambda_ratio
from .progress import ApprogParams, EpochLayout, EpochMachine, plan_epoch

__all__ = [
    "MacAutomaton",
    "MacEvent",
    "MacGuarantees",
    "MacParams",
    "MacPlan",
    "mac_plan",
    "validate_event_log",
]


@dataclass(frozen=True)
class MacParams:
    """Knobs for the combined layer."""

    ack_eps: float = 0.1
    approg: ApprogParams = field(default_factory=ApprogParams)
    rcv_filter_strong_only: bool = False
    ack_degree_coeff: float = 32.0
    ack_log_coeff: float = 384.0

    def __post_init__(self):
        if not 0.0 < self.ack_eps < 1.0:
            raise ValueError("ack_eps must lie in (0, 1)")


@dataclass(frozen=True)
class MacGuarantees:
    """Windows promised by the layer, with their clocks spelled out.

    ack_window counts real slots: an accepted broadcast is acknowledged
    exactly that many slots after the bcast event. epoch_len counts
    epoch-clock slots (one per odd real slot, starting at real slot 1), and
    progress_window is the real-slot horizon by which one complete epoch
    with this broadcast as a member has finished, assuming the ack window
    is long enough to span it.
    """

    ack_window: int
    epoch_len: int

    @property
    def progress_window(self) -> int:
        # worst case: the bcast lands just after a boundary, so a full
        # fresh epoch ends within two epoch lengths on the half-rate clock
        return 4 * self.epoch_len + 1

    def epoch_to_real(self, k: int) -> int:
        return 2 * k + 1

    def real_to_epoch(self, slot: int) -> int:
        if slot < 1:
            raise ValueError("epoch clock starts at real slot 1")
        return (slot - 1) // 2


@dataclass(frozen=True)
class MacPlan:
    """Everything a node needs to run the combined layer."""

    params: MacParams
    ack_params: AckParams
    layout: EpochLayout
    guarantees: MacGuarantees


def mac_plan(topo: Topology, params: SinrParams, mparams: MacParams) -> MacPlan:
    """Size the layer for a topology: ack window from the strong-graph degree,
    epoch layout from the range ratio."""
    lam = lambda_ratio(topo, params)
    degree = max(1, strong_graph(topo, params).max_degree())
    steps = ack_bound(
        degree,
        lam,
        mparams.ack_eps,
        c_degree=mparams.ack_degree_coeff,
        c_log=mparams.ack_log_coeff,
    )
    layout = plan_epoch(mparams.approg, lam, params.alpha)
    ack_params = AckParams(eps=mparams.ack_eps, n_estimate=default_n_estimate(lam))
    return MacPlan(
        params=mparams,
        ack_params=ack_params,
        layout=layout,
        guarantees=MacGuarantees(ack_window=2 * steps, epoch_len=layout.epoch_len),
    )


@dataclass(frozen=True)
class MacEvent:
    slot: int
    node: int
    kind: str  # bcast, rcv, ack, abort
    mid: Any
    origin: int  # message owner for rcv, self otherwise


class MacAutomaton(NodeAutomaton):
    """One node of the combined layer.

    Subclasses hook handle_rcv / handle_ack / handle_abort to build
    protocols on top; the default implementations record events only.
    begin_broadcast may be called from those hooks or fed through the
    engine's env schedule as ("bcast", mid, payload); ("abort",) withdraws
    the active message.
    """

    def __init__(
        self,
        node_id: int,
        plan: MacPlan,
        seed: int,
        allowed_origins: Optional[Set[int]] = None,
    ):
        self.node_id = node_id
        self.plan = plan
        self.events: List[MacEvent] = []
        self._ack_rng = per_node_rng(seed, node_id, "mac-ack")
        self._epoch_rng = per_node_rng(seed, node_id, "mac-epoch")
        self._allowed = allowed_origins
        if plan.params.rcv_filter_strong_only and allowed_origins is None:
            raise ValueError("the strong-only filter needs an allowed-origin set")
        # active broadcast bookkeeping
        self._mid = None
        self._payload = None
        self._t0 = -1
        self._active = False
        self._ack_state = None
        self._even_recv = False
        # epoch bookkeeping
        self._machine: Optional[EpochMachine] = None
        self._epoch_idx = -1
        self._epoch_rcvd: set = set()

    # -- client surface ------------------------------------------------------

    def begin_broadcast(self, slot: int, mid: Any, payload: Any) -> None:
        if self._active:
            raise RuntimeError(f"node {self.node_id} already has an active broadcast")
        self._mid = mid
        self._payload = payload
        self._t0 = slot
        self._active = True
        self._ack_state = ack_init(self.plan.ack_params)
        self._even_recv = False
        self.events.append(MacEvent(slot, self.node_id, "bcast", mid, self.node_id))

    def abort_broadcast(self, slot: int) -> None:
        if not self._active:
            raise RuntimeError(f"node {self.node_id} has no broadcast to abort")
        self.events.append(MacEvent(slot, self.node_id, "abort", self._mid, self.node_id))
        self._active = False
        self._ack_state = None
        if self._machine is not None:
            self._machine.muzzled = True
        self.handle_abort(slot, self._mid)
        self._mid = None
        self._payload = None

    @property
    def busy(self) -> bool:
        return self._active

    # -- protocol hooks ------------------------------------------------------

    def handle_rcv(self, slot: int, origin: int, mid: Any, payload: Any) -> None:
        pass

    def handle_ack(self, slot: int, mid: Any) -> None:
        pass

    def handle_abort(self, slot: int, mid: Any) -> None:
        pass

    # -- engine interface ----------------------------------------------------

    def on_env_input(self, slot: int, value: Any) -> None:
        if isinstance(value, tuple) and value:
            if value[0] == "bcast":
                self.begin_broadcast(slot, value[1], value[2])
                return
            if value[0] == "abort":
                self.abort_broadcast(slot)
                return
        raise ValueError(f"unrecognized env input {value!r}")

    def on_slot(self, slot: int) -> SlotAction:
        if self._active and slot >= self._t0 + self.plan.guarantees.ack_window:
            self.events.append(MacEvent(slot, self.node_id, "ack", self._mid, self.node_id))
            mid = self._mid
            self._active = False
            self._ack_state = None
            self._mid = None
            self._payload = None
            self.handle_ack(slot, mid)
        if slot % 2 == 0:
            return self._even_slot(slot)
        return self._odd_slot(slot)

    def _even_slot(self, slot: int) -> SlotAction:
        if not self._active or self._ack_state is None or self._ack_state.halted:
            self._even_recv = False
            return LISTEN
        received = self._even_recv
        self._even_recv = False
        tx = ack_step(
            self._ack_state,
            self.plan.ack_params,
            received,
            float(self._ack_rng.random()),
        )
        if tx:
            return Transmit(("mac_ack", self.node_id, self._mid, self._payload))
        return LISTEN

    def _odd_slot(self, slot: int) -> SlotAction:
        lay = self.plan.layout
        k = (slot - 1) // 2
        epoch_idx, off = divmod(k, lay.epoch_len)
        if epoch_idx != self._epoch_idx:
            self._begin_epoch(epoch_idx, slot)
        payload = self._machine.act(off)
        if payload is None:
            return LISTEN
        return Transmit(payload)

    def _begin_epoch(self, epoch_idx: int, slot: int) -> None:
        self._epoch_idx = epoch_idx
        self._epoch_rcvd = set()
        member = self._active and self._t0 < slot <= self._t0 + self.plan.guarantees.ack_window
        self._machine = EpochMachine(
            self.node_id,
            self.plan.layout,
            self._epoch_rng,
            message=(self._mid, self._payload) if member else None,
            participating=member,
        )

    def on_receive(self, slot: int, payload: Any) -> None:
        if not isinstance(payload, tuple) or not payload:
            return
        kind = payload[0]
        if kind == "mac_ack":
            _, origin, mid, body = payload
            if slot % 2 == 0:
                self._even_recv = True
            self._surface_rcv(slot, origin, mid, body)
            return
        if slot % 2 == 0:
            return  # stray even-slot traffic that is not ack-layer
        k = (slot - 1) // 2
        epoch_idx, off = divmod(k, self.plan.layout.epoch_len)
        if epoch_idx != self._epoch_idx:
            self._begin_epoch(epoch_idx, slot)
        if kind == "burst":
            origin, msg = payload[1], payload[2]
            mid, body = msg
            self._surface_rcv(slot, origin, mid, body)
        self._machine.hear(off, payload)

    def _surface_rcv(self, slot: int, origin: int, mid: Any, body: Any) -> None:
        if mid in self._epoch_rcvd:
            return
        if self.plan.params.rcv_filter_strong_only and origin not in self._allowed:
            return
        self._epoch_rcvd.add(mid)
        self.events.append(MacEvent(slot, self.node_id, "rcv", mid, origin))
        self.handle_rcv(slot, origin, mid, body)


def validate_event_log(events: List[MacEvent], guarantees: MacGuarantees) -> None:
    """Check the per-broadcast event contract on one node's log.

    Every bcast must be closed by exactly one ack or abort before the next
    bcast starts, and acks must land exactly ack_window slots after their
    bcast. Raises AssertionError on the first violation.
    """
    open_mid = None
    open_slot = -1
    for ev in events:
        if ev.kind == "bcast":
            if open_mid is not None:
                raise AssertionError(
                    f"bcast {ev.mid!r} at slot {ev.slot} while {open_mid!r} still open"
                )
            open_mid, open_slot = ev.mid, ev.slot
        elif ev.kind == "ack":
            if open_mid != ev.mid:
                raise AssertionError(f"ack for {ev.mid!r} without matching bcast")
            if ev.slot != open_slot + guarantees.ack_window:
                raise AssertionError(
                    f"ack for {ev.mid!r} at slot {ev.slot}, expected "
                    f"{open_slot + guarantees.ack_window}"
                )
            open_mid = None
        elif ev.kind == "abort":
            if open_mid != ev.mid:
                raise AssertionError(f"abort for {ev.mid!r} without matching bcast")
            open_mid = None
        elif ev.kind != "rcv":
            raise AssertionError(f"unknown event kind {ev.kind!r}")
