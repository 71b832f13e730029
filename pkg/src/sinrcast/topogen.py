"""Deterministic topology generators used by tests and experiments.

Everything here returns a plain Topology; the layouts are the usual
suspects for exercising the machinery: uniform random scatter with a
spacing floor, lines for diameter sweeps, a ring around a hub for degree
control, and a hex-packed disc for dense high-degree neighborhoods.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .model import Topology

__all__ = [
    "gen_hex_disc",
    "gen_line",
    "gen_ring_with_center",
    "gen_uniform",
    "hex_disc_size",
    "power_for_strong_range",
]


def power_for_strong_range(
    strong: float, alpha: float, beta: float, noise: float, eps: float
) -> float:
    """Transmit power that puts the dependable range at exactly `strong`."""
    if strong <= 0:
        raise ValueError("strong range must be positive")
    weak = strong / (1.0 - eps)
    return beta * noise * weak**alpha


def gen_uniform(
    n: int,
    width: float,
    height: Optional[float] = None,
    seed: int = 0,
    min_spacing: float = 1.0,
    max_attempts: Optional[int] = None,
) -> Topology:
    """Scatter n points uniformly in a box, rejecting spacing violations.

    Sampling is sequential: each draw is kept only if it clears
    `min_spacing` from everything already placed. Raises if the attempt
    budget runs out, which is the usual sign the box is too small.
    """
    if n < 1:
        raise ValueError("need at least one node")
    if height is None:
        height = width
    if max_attempts is None:
        max_attempts = 500 * n
    rng = np.random.default_rng(seed)
    pts: list[np.ndarray] = []
    attempts = 0
    while len(pts) < n:
        if attempts >= max_attempts:
            raise ValueError(
                f"placed {len(pts)}/{n} nodes in {attempts} attempts; "
                "box too crowded for the spacing floor"
            )
        attempts += 1
        cand = rng.uniform((0.0, 0.0), (width, height))
        ok = True
        for p in pts:
            if float(np.hypot(*(p - cand))) < min_spacing:
                ok = False
                break
        if ok:
            pts.append(cand)
    return Topology(np.array(pts))


def gen_line(n: int, spacing: float = 1.0) -> Topology:
    """n collinear nodes with uniform gaps along the x axis."""
    if n < 1:
        raise ValueError("need at least one node")
    if spacing < 1.0:
        raise ValueError("spacing below the 1.0 floor")
    return Topology([(i * spacing, 0.0) for i in range(n)])


def gen_ring_with_center(k: int, radius: float) -> Topology:
    """A hub (id 0) plus k nodes evenly spaced on a circle around it.

    Handy for pinning the hub's degree at exactly k while keeping the
    layout otherwise symmetric. The circle must be wide enough that
    adjacent ring nodes keep unit spacing.
    """
    if k < 2:
        raise ValueError("ring needs at least two nodes")
    if radius < 1.0:
        raise ValueError("hub-to-ring distance below the 1.0 floor")
    gap = 2.0 * radius * math.sin(math.pi / k)
    if gap < 1.0 - 1e-12:
        raise ValueError(
            f"ring of {k} at radius {radius:g} packs nodes {gap:.3g} apart"
        )
    pts = [(0.0, 0.0)]
    for i in range(k):
        ang = 2.0 * math.pi * i / k
        pts.append((radius * math.cos(ang), radius * math.sin(ang)))
    return Topology(pts)


def hex_disc_size(rings: int) -> int:
    """Node count of gen_hex_disc(rings)."""
    if rings < 0:
        raise ValueError("rings must be nonnegative")
    return 1 + 3 * rings * (rings + 1)


def gen_hex_disc(rings: int, spacing: float = 1.0) -> Topology:
    """Triangular-lattice disc: a center node plus `rings` hex rings.

    The densest packing that respects the spacing floor, so it maximizes
    degree for a given footprint. Ring r contributes 6r nodes; the disc
    diameter is 2 * rings * spacing.
    """
    if rings < 0:
        raise ValueError("rings must be nonnegative")
    if spacing < 1.0:
        raise ValueError("spacing below the 1.0 floor")
    pts = []
    for q in range(-rings, rings + 1):
        lo = max(-rings, -q - rings)
        hi = min(rings, -q + rings)
        for r in range(lo, hi + 1):
            x = spacing * (q + 0.5 * r)
            y = spacing * (math.sqrt(3.0) / 2.0) * r
            pts.append((x, y))
    # center-first id order is convenient for picking the hub
    pts.sort(key=lambda p: (round(math.hypot(*p), 9), p))
    return Topology(pts)
