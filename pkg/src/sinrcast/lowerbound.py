"""Worst-case instance showing per-slot progress can stall at one receiver.

The construction is two parallel unit-spaced lines of delta nodes each,
one of senders and one of receivers, separated by exactly the dependable
range (power is solved so that range comes out at 10 * delta). Each
receiver then has exactly one dependable cross link, the sender directly
opposite, and that link sits right on the range boundary: the decode
margin is a fixed constant, so interference from any other transmitter
anywhere in the instance pushes it under the threshold. A brute-force
sweep over every transmitter subset confirms that no schedule gets more
than one cross link through in a single slot.

The sweep, like the argument it checks, assumes the shared uniform
transmit power; per-node power control is outside its reach and the
summary of any run should say so.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .model import (
    BOUNDARY_RTOL,
    SinrParams,
    Topology,
    received_from,
    transmission_range,
)

__all__ = [
    "LB_EPS",
    "LbOutcome",
    "brute_force_progress_lb",
    "gen_two_line_lb",
    "MAX_BRUTE_NODES",
]

LB_ALPHA = 3.0
LB_BETA = 2.0
LB_NOISE = 1.0
LB_EPS = 1.0 / 6.0
MAX_BRUTE_NODES = 16


def gen_two_line_lb(delta: int) -> Tuple[Topology, SinrParams]:
    """Build the stalled-progress instance for a given line length."""
    if delta < 2:
        raise ValueError("need at least two nodes per line")
    if 2 * delta > MAX_BRUTE_NODES:
        raise ValueError(
            f"brute-force sweep is capped at {MAX_BRUTE_NODES} nodes total"
        )
    # dependable range (1 - eps) * weak = 10 * delta needs weak = 12 * delta
    gap = 10.0 * delta
    power = LB_BETA * LB_NOISE * (1.2 * gap) ** LB_ALPHA
    params = SinrParams(
        alpha=LB_ALPHA, beta=LB_BETA, noise=LB_NOISE, power=power, eps=LB_EPS
    )
    pts = [(float(i), 0.0) for i in range(delta)]
    pts += [(float(j), gap) for j in range(delta)]
    return Topology(np.array(pts)), params


@dataclass(frozen=True)
class LbOutcome:
    max_decoded: int
    witness: Tuple[int, ...]  # a transmitter subset achieving the max
    subsets_checked: int


def brute_force_progress_lb(topo: Topology, params: SinrParams) -> LbOutcome:
    """Sweep every transmitter subset and score cross-line receptions.

    Ids 0..n/2-1 form the sender line, the rest the receiver line. Any
    subset of the whole instance may transmit; the score of a subset is
    how many receiver-line nodes decode a sender-line node that is within
    their dependable range. Returns the best score over all subsets.
    """
    if topo.n % 2 != 0:
        raise ValueError("expected two equal lines")
    if topo.n > MAX_BRUTE_NODES:
        raise ValueError(f"brute force is capped at {MAX_BRUTE_NODES} nodes")
    half = topo.n // 2
    receivers = list(range(half, topo.n))
    strong = transmission_range(params).strong * (1.0 + BOUNDARY_RTOL)

    best = 0
    witness: Tuple[int, ...] = ()
    checked = 0
    for mask in range(1 << topo.n):
        checked += 1
        active = {v for v in range(topo.n) if mask >> v & 1}
        score = 0
        for u in receivers:
            if u in active:
                continue
            got = received_from(u, active, topo, params)
            if got is not None and got < half and topo.distance(u, got) <= strong:
                score += 1
        if score > best:
            best = score
            witness = tuple(sorted(active))
    return LbOutcome(max_decoded=best, witness=witness, subsets_checked=checked)
