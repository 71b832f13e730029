"""Link reliability under random slotted transmissions.

A link (v -> u) inside a member set S has reliability equal to the
probability that u decodes v in a slot where every member transmits
independently with probability p. The exact value enumerates all subsets of
the remaining members; the Monte Carlo estimator samples the same process
with a deterministic, block-partitioned stream so results depend only on
the seed and trial count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .graphs import Graph
from .model import (
    BOUNDARY_RTOL,
    NodeId,
    SinrParams,
    Topology,
    transmission_range,
)

# Subset enumeration is capped by member count; 22 members means 2^20
# interferer subsets, about a million vector lanes.
DEFAULT_EXACT_CAP = 22

# Monte Carlo draws are partitioned into fixed blocks, each with its own
# substream, so the estimate is reproducible and block-parallelizable.
MC_BLOCK = 1 << 16


@dataclass(frozen=True)
class ReliabilityParams:
    """Transmission probability and the thresholds built on top of it.

    p is the per-slot transmit probability, mu the reliability level that
    counts as a dependable link, gamma the slack separating links that must
    appear from links that may appear.
    """

    p: float
    mu: float
    gamma: float

    def __post_init__(self) -> None:
        if not 0 < self.p <= 0.5:
            raise ValueError(f"p must lie in (0, 1/2], got {self.p}")
        if not 0 < self.mu < self.p:
            raise ValueError(f"mu must lie in (0, p), got {self.mu}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")


def _member_check(
    receiver: NodeId, sender: NodeId, members: Iterable[NodeId]
) -> List[NodeId]:
    mset = sorted(set(members))
    if receiver == sender:
        raise ValueError("receiver and sender must differ")
    if receiver not in mset or sender not in mset:
        raise ValueError("receiver and sender must both belong to the member set")
    return mset


def exact_reliability(
    receiver: NodeId,
    sender: NodeId,
    members: Iterable[NodeId],
    topology: Topology,
    params: SinrParams,
    rel: ReliabilityParams,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> float:
    """Exact link reliability by full subset enumeration."""
    mset = _member_check(receiver, sender, members)
    if len(mset) > exact_cap:
        raise ValueError(
            f"exact enumeration capped at {exact_cap} members, got {len(mset)}"
        )
    others = [w for w in mset if w != receiver and w != sender]
    p = rel.p
    sig = params.power / topology.distance(sender, receiver) ** params.alpha
    # interference sums and transmitter counts for every subset of `others`,
    # built by doubling
    inter = np.zeros(1)
    count = np.zeros(1, dtype=np.int64)
    for w in others:
        g = params.power / topology.distance(w, receiver) ** params.alpha
        inter = np.concatenate([inter, inter + g])
        count = np.concatenate([count, count + 1])
    ok = sig / (inter + params.noise) >= params.beta * (1.0 - BOUNDARY_RTOL)
    k = len(others)
    weights = p ** count * (1.0 - p) ** (k - count)
    return float(p * (1.0 - p) * weights[ok].sum())


def mc_reliability(
    receiver: NodeId,
    sender: NodeId,
    members: Iterable[NodeId],
    topology: Topology,
    params: SinrParams,
    rel: ReliabilityParams,
    trials: int,
    seed: int,
) -> float:
    """Monte Carlo link reliability; deterministic for a given seed.

    Trials are processed in fixed-size blocks, block i drawing from its own
    substream, so the estimate does not depend on evaluation order.
    """
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    mset = _member_check(receiver, sender, members)
    others = [w for w in mset if w != receiver and w != sender]
    p = rel.p
    sig = params.power / topology.distance(sender, receiver) ** params.alpha
    gains = np.array(
        [params.power / topology.distance(w, receiver) ** params.alpha for w in others]
    )
    thresh = params.beta * (1.0 - BOUNDARY_RTOL)
    hits = 0
    done = 0
    block_i = 0
    while done < trials:
        b = min(MC_BLOCK, trials - done)
        rng = np.random.default_rng(np.random.SeedSequence([seed, block_i]))
        u = rng.random((b, len(others) + 2))
        active = (u[:, 0] >= p) & (u[:, 1] < p)  # receiver quiet, sender on
        if len(others):
            inter = (u[:, 2:] < p) @ gains
        else:
            inter = np.zeros(b)
        ok = active & (sig / (inter + params.noise) >= thresh)
        hits += int(ok.sum())
        done += b
        block_i += 1
    return hits / trials


def reliability_graph(
    topology: Topology,
    params: SinrParams,
    rel: ReliabilityParams,
    members: Optional[Iterable[NodeId]] = None,
    estimator: Optional[Callable[[NodeId, NodeId], float]] = None,
) -> Graph:
    """Graph of links dependable in both directions at level mu.

    The default estimator is the exact enumeration; pass a custom one (for
    instance a Monte Carlo closure) for member sets beyond the exact cap.
    """
    mset = sorted(set(members)) if members is not None else list(topology.ids)
    if estimator is None:
        def estimator(u: NodeId, v: NodeId) -> float:
            return exact_reliability(u, v, mset, topology, params, rel)

    weak = transmission_range(params).weak * (1.0 + BOUNDARY_RTOL)
    edges = []
    for i, u in enumerate(mset):
        for v in mset[i + 1:]:
            if topology.distance(u, v) > weak:
                continue  # reliability is exactly zero past the weak range
            if estimator(u, v) >= rel.mu and estimator(v, u) >= rel.mu:
                edges.append((u, v))
    return Graph(mset, edges)


def calibrate_mu(
    topology: Topology,
    params: SinrParams,
    rel: ReliabilityParams,
    distance_cap: float,
    members: Optional[Iterable[NodeId]] = None,
    estimator: Optional[Callable[[NodeId, NodeId], float]] = None,
) -> float:
    """Largest threshold at which every pair within distance_cap is a link.

    Reliability-vs-threshold is monotone, so instead of bisecting we take
    the minimum directed reliability over the capped pairs, which is the
    exact answer a bisection would converge to.
    """
    mset = sorted(set(members)) if members is not None else list(topology.ids)
    if estimator is None:
        def estimator(u: NodeId, v: NodeId) -> float:
            return exact_reliability(u, v, mset, topology, params, rel)

    worst = math.inf
    pairs = 0
    for i, u in enumerate(mset):
        for v in mset[i + 1:]:
            if topology.distance(u, v) > distance_cap * (1.0 + BOUNDARY_RTOL):
                continue
            pairs += 1
            worst = min(worst, estimator(u, v), estimator(v, u))
    if pairs == 0:
        raise ValueError(f"no pair of members within distance {distance_cap:.6g}")
    if worst <= 0:
        raise ValueError(
            "a capped pair measured zero reliability; raise the trial count"
        )
    return worst
