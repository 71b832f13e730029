"""Acknowledged local broadcast by probability doubling.

A broadcaster ramps its transmit probability up by doubling, falls back
hard whenever it hears enough traffic from others (evidence that it is
drowning someone out), and halts once the accumulated transmit probability
exceeds a fixed budget. Receptions are processed with a one-slot lag: what
a node heard in slot t informs its behavior from slot t+1 on, which is the
natural reading of an event-driven rule in a slotted world.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

from .engine import LISTEN, NodeAutomaton, SlotAction, Transmit

P_CAP = 1.0 / 16.0


@dataclass(frozen=True)
class AckParams:
    """Tuning for one acknowledged-broadcast run.

    eps is the per-run failure budget, n_estimate the assumed bound on
    relevant contenders, inner_factor the length multiplier of one doubling
    pass, halt_factor the budget multiplier that ends the run.
    """

    eps: float
    n_estimate: float
    inner_factor: float = 12.0
    halt_factor: float = 8.0

    def __post_init__(self) -> None:
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not self.n_estimate >= 1:
            raise ValueError(f"n_estimate must be at least 1, got {self.n_estimate}")
        if self.inner_factor <= 0 or self.halt_factor <= 0:
            raise ValueError("factors must be positive")


def default_n_estimate(lam: float) -> float:
    """Contender estimate implied by the range-to-spacing ratio."""
    return 4.0 * lam * lam


def inner_pass_length(params: AckParams) -> int:
    """Slots between consecutive probability doublings."""
    return max(1, math.ceil(params.inner_factor * math.log2(params.n_estimate / params.eps)))


def recv_reset_threshold(params: AckParams) -> float:
    """Received-message count that triggers the hard fallback."""
    return 8.0 * math.log2(2.0 * params.n_estimate / params.eps)


def halt_budget(params: AckParams) -> float:
    """Total transmit probability a run may spend before halting."""
    return params.halt_factor * math.log2(params.n_estimate / params.eps)


def probability_floor(params: AckParams) -> float:
    return 1.0 / (128.0 * params.n_estimate)


def fallback_probability(p: float, n_estimate: float) -> float:
    """Hard fallback: divide by 32, clamped to the floor."""
    return max(1.0 / (128.0 * n_estimate), p / 32.0)


def doubled_probability(p: float) -> float:
    """One ramp step: double, clamped to the cap."""
    return min(P_CAP, 2.0 * p)


@dataclass
class AckState:
    p: float
    total_p: float = 0.0
    recv_count: int = 0
    inner_pos: int = 0
    entered: bool = False
    halted: bool = False


def ack_init(params: AckParams) -> AckState:
    """Fresh state, transmit probability one quarter of the density guess."""
    return AckState(p=1.0 / (4.0 * params.n_estimate))


def ack_step(state: AckState, params: AckParams, received: bool, draw: float) -> bool:
    """Advance one slot; returns whether to transmit.

    `received` says whether the node heard another message in the previous
    slot; `draw` is a uniform [0,1) sample. The state is updated in place.
    The halting slot itself still transmits if the draw says so.
    """
    if state.halted:
        raise RuntimeError("ack automaton already halted")
    if received:
        state.recv_count += 1
    if not state.entered:
        # first slot: enter the outer loop, then the ramp
        state.p = fallback_probability(state.p, params.n_estimate)
        state.recv_count = 0
        state.p = doubled_probability(state.p)
        state.inner_pos = 0
        state.entered = True
    elif received and state.recv_count > recv_reset_threshold(params):
        state.p = fallback_probability(state.p, params.n_estimate)
        state.recv_count = 0
        state.p = doubled_probability(state.p)
        state.inner_pos = 0
    elif state.inner_pos >= inner_pass_length(params):
        state.p = doubled_probability(state.p)
        state.inner_pos = 0
    transmit = draw < state.p
    state.total_p += state.p
    state.inner_pos += 1
    if state.total_p > halt_budget(params):
        state.halted = True
    return transmit


def ack_bound(
    degree: int,
    lam: float,
    eps: float,
    c_degree: float = 32.0,
    c_log: float = 384.0,
) -> int:
    """Slot bound by which an acknowledged broadcast is done.

    The constants were pinned empirically against worst-case halting times
    of the algorithm itself (the second term dominates at small degree).
    """
    if lam < 1:
        raise ValueError(f"range-to-spacing ratio must be at least 1, got {lam}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    t = math.log2(lam / eps)
    return math.ceil(c_degree * degree * t + c_log * math.log2(lam) * t)


class AckBroadcastAutomaton(NodeAutomaton):
    """Engine adapter: runs one acknowledged broadcast, then goes quiet."""

    def __init__(self, params: AckParams, payload: Any, rng):
        self.params = params
        self.payload = payload
        self.rng = rng
        self.state = ack_init(params)
        self.halt_slot: Optional[int] = None
        self.heard: list = []
        self._recv_pending = False

    def on_slot(self, slot: int) -> SlotAction:
        if self.state.halted:
            return LISTEN
        received = self._recv_pending
        self._recv_pending = False
        tx = ack_step(self.state, self.params, received, float(self.rng.random()))
        if self.state.halted:
            self.halt_slot = slot
            self.done = True
        return Transmit(self.payload) if tx else LISTEN

    def on_receive(self, slot: int, payload: Any) -> None:
        self._recv_pending = True
        self.heard.append((slot, payload))
