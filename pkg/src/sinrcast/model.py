"""Core SINR arithmetic: parameters, node layouts, reception predicates.

Reception is decided by the classic signal-to-interference-plus-noise test
with a closed threshold: a transmission is decodable when the ratio meets
the decoding threshold, boundary included. All comparisons against the
threshold use a small relative slack so layouts constructed to sit exactly
on a boundary are not lost to float rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

NodeId = int
Position = tuple[float, float]

# Relative slack for closed comparisons at decoding/range boundaries.
BOUNDARY_RTOL = 1e-9


@dataclass(frozen=True)
class SinrParams:
    """Physical-layer constants.

    alpha is the path-loss exponent, beta the decoding threshold, noise the
    ambient noise power, power the shared transmit power, and eps the
    shrink factor separating the reliable ("strong") communication range
    from the outer limit of decodability.
    """

    alpha: float
    beta: float
    noise: float
    power: float
    eps: float = 0.1

    def __post_init__(self) -> None:
        if not self.alpha > 2:
            raise ValueError(f"alpha must exceed 2, got {self.alpha}")
        if not self.beta > 1:
            raise ValueError(f"beta must exceed 1, got {self.beta}")
        if not self.noise > 0:
            raise ValueError(f"noise must be positive, got {self.noise}")
        if not self.power > 0:
            raise ValueError(f"power must be positive, got {self.power}")
        if not 0 < self.eps < 0.5:
            raise ValueError(f"eps must lie strictly between 0 and 1/2, got {self.eps}")


@dataclass(frozen=True)
class DerivedRanges:
    """Distances implied by a parameter set.

    weak: the largest distance at which an isolated transmission decodes.
    strong: (1 - eps) * weak, the range the algorithms treat as dependable.
    approx: (1 - 2 eps) * weak, the range used by progress guarantees.
    """

    weak: float
    strong: float
    approx: float


def transmission_range(params: SinrParams) -> DerivedRanges:
    weak = (params.power / (params.beta * params.noise)) ** (1.0 / params.alpha)
    return DerivedRanges(
        weak=weak,
        strong=(1.0 - params.eps) * weak,
        approx=(1.0 - 2.0 * params.eps) * weak,
    )


class Topology:
    """Immutable planar node layout, ids 0..n-1, minimum spacing 1.

    The full distance matrix is computed once on construction; everything
    downstream indexes into it.
    """

    def __init__(self, positions: Sequence[Position]):
        pts = np.asarray(positions, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("positions must be a sequence of (x, y) pairs")
        if not np.isfinite(pts).all():
            raise ValueError("positions must be finite")
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        n = pts.shape[0]
        if n >= 2:
            iu = np.triu_indices(n, k=1)
            off = dist[iu]
            k = int(np.argmin(off))
            if off[k] < 1.0 - 1e-12:
                i, j = int(iu[0][k]), int(iu[1][k])
                raise ValueError(
                    f"nodes {i} and {j} are {off[k]:.6g} apart; minimum spacing is 1"
                )
        self._pts = pts
        self._dist = dist
        self._dist.setflags(write=False)
        self._pts.setflags(write=False)

    @property
    def n(self) -> int:
        return self._pts.shape[0]

    @property
    def ids(self) -> range:
        return range(self.n)

    def position(self, v: NodeId) -> Position:
        self._check_id(v)
        return (float(self._pts[v, 0]), float(self._pts[v, 1]))

    @property
    def positions(self) -> np.ndarray:
        """Read-only (n, 2) array of coordinates."""
        return self._pts

    def distance(self, u: NodeId, v: NodeId) -> float:
        self._check_id(u)
        self._check_id(v)
        return float(self._dist[u, v])

    @property
    def distance_matrix(self) -> np.ndarray:
        """Read-only (n, n) matrix of pairwise distances."""
        return self._dist

    def min_distance(self) -> float:
        if self.n < 2:
            raise ValueError("minimum distance needs at least two nodes")
        iu = np.triu_indices(self.n, k=1)
        return float(self._dist[iu].min())

    def _check_id(self, v: NodeId) -> None:
        if not isinstance(v, (int, np.integer)) or not 0 <= v < self.n:
            raise KeyError(f"unknown node id {v!r}")

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Topology(n={self.n})"


def gain_matrix(topology: Topology, params: SinrParams) -> np.ndarray:
    """Received power power/d^alpha for every ordered pair; zero diagonal."""
    d = topology.distance_matrix
    with np.errstate(divide="ignore"):
        g = params.power / (d ** params.alpha)
    np.fill_diagonal(g, 0.0)
    return g


def interference_at(
    point: Position,
    senders: Iterable[NodeId],
    topology: Topology,
    params: SinrParams,
) -> float:
    """Total received power at an arbitrary point from a set of transmitters.

    A transmitter located exactly at the point contributes infinite power.
    """
    px, py = float(point[0]), float(point[1])
    total = 0.0
    for w in senders:
        topology._check_id(w)
        wx, wy = topology.position(w)
        d = math.hypot(px - wx, py - wy)
        if d == 0.0:
            return math.inf
        total += params.power / d ** params.alpha
    return total


def sinr_at(
    receiver: NodeId,
    sender: NodeId,
    senders: Iterable[NodeId],
    topology: Topology,
    params: SinrParams,
) -> float:
    """Signal-to-interference-plus-noise ratio of `sender` at `receiver`.

    `senders` is the full set of concurrent transmitters and must contain
    `sender`. The receiver cannot be transmitting (half duplex).
    """
    sset = set(senders)
    topology._check_id(receiver)
    for w in sset:
        topology._check_id(w)
    if receiver in sset:
        raise ValueError(f"node {receiver} is transmitting and cannot receive (half duplex)")
    if sender not in sset:
        raise ValueError(f"sender {sender} is not in the transmitting set")
    signal = params.power / topology.distance(sender, receiver) ** params.alpha
    interference = 0.0
    for w in sset:
        if w != sender:
            interference += params.power / topology.distance(w, receiver) ** params.alpha
    return signal / (interference + params.noise)


def is_received(
    receiver: NodeId,
    sender: NodeId,
    senders: Iterable[NodeId],
    topology: Topology,
    params: SinrParams,
) -> bool:
    """Closed-threshold decoding test with boundary slack."""
    ratio = sinr_at(receiver, sender, senders, topology, params)
    return ratio >= params.beta * (1.0 - BOUNDARY_RTOL)


def received_from(
    receiver: NodeId,
    senders: Iterable[NodeId],
    topology: Topology,
    params: SinrParams,
) -> Optional[NodeId]:
    """The unique transmitter decodable at `receiver`, or None.

    With beta > 1 only the strongest transmitter can pass the threshold;
    ties mean nobody passes. The degenerate regime where beta is within
    rounding slack of 1 falls back to checking every transmitter.
    """
    sset = sorted(set(senders))
    if not sset:
        return None
    topology._check_id(receiver)
    if receiver in sset:
        raise ValueError(f"node {receiver} is transmitting and cannot receive (half duplex)")
    gains = [params.power / topology.distance(w, receiver) ** params.alpha for w in sset]
    best = max(gains)
    if params.beta * (1.0 - BOUNDARY_RTOL) > 1.0:
        candidates = [w for w, g in zip(sset, gains) if g == best]
    else:
        candidates = sset
    winners = [w for w in candidates if is_received(receiver, w, sset, topology, params)]
    assert len(winners) <= 1, f"multiple decodable transmitters at {receiver}: {winners}"
    return winners[0] if winners else None


def lambda_ratio(topology: Topology, params: SinrParams) -> float:
    """Strong range divided by the minimum node spacing.

    Defined only when some pair of nodes actually sits within the strong
    range of each other; otherwise the layout has no dependable link at all
    and the quantity is meaningless.
    """
    if topology.n < 2:
        raise ValueError("ratio needs at least two nodes")
    strong = transmission_range(params).strong
    dmin = topology.min_distance()
    if dmin > strong * (1.0 + BOUNDARY_RTOL):
        raise ValueError(
            f"no pair of nodes within the strong range ({dmin:.6g} > {strong:.6g})"
        )
    return strong / dmin
