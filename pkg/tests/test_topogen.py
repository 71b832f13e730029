import math

import numpy as np
import pytest

from sinrcast.model import SinrParams, transmission_range
from sinrcast.topogen import (
    gen_hex_disc,
    gen_line,
    gen_ring_with_center,
    gen_uniform,
    hex_disc_size,
    power_for_strong_range,
)


def test_uniform_respects_spacing_and_seed():
    t1 = gen_uniform(25, 20.0, seed=7)
    t2 = gen_uniform(25, 20.0, seed=7)
    t3 = gen_uniform(25, 20.0, seed=8)
    assert t1.n == 25
    assert t1.min_distance() >= 1.0
    assert np.array_equal(t1.positions, t2.positions)
    assert not np.array_equal(t1.positions, t3.positions)
    assert t1.positions.min() >= 0.0
    assert t1.positions.max() <= 20.0


def test_uniform_rejects_overfull_box():
    with pytest.raises(ValueError, match="crowded"):
        gen_uniform(50, 3.0, seed=1, max_attempts=2000)


def test_line_layout():
    topo = gen_line(5, spacing=2.0)
    assert topo.n == 5
    assert topo.position(3) == (6.0, 0.0)
    assert topo.min_distance() == 2.0
    with pytest.raises(ValueError):
        gen_line(3, spacing=0.5)


def test_ring_with_center_geometry():
    k, radius = 8, 3.0
    topo = gen_ring_with_center(k, radius)
    assert topo.n == k + 1
    for i in range(1, k + 1):
        assert math.isclose(topo.distance(0, i), radius, rel_tol=1e-12)
    gap = topo.distance(1, 2)
    assert math.isclose(gap, 2 * radius * math.sin(math.pi / k), rel_tol=1e-12)
    # too many nodes for the circumference
    with pytest.raises(ValueError, match="packs"):
        gen_ring_with_center(40, 3.0)


def test_hex_disc_counts_and_spacing():
    for rings in (0, 1, 2, 4):
        topo = gen_hex_disc(rings, spacing=1.5)
        assert topo.n == hex_disc_size(rings) == 1 + 3 * rings * (rings + 1)
        if topo.n > 1:
            assert math.isclose(topo.min_distance(), 1.5, rel_tol=1e-12)
    # id 0 is the center
    topo = gen_hex_disc(3)
    assert topo.position(0) == (0.0, 0.0)
    # everything within rings*spacing of the center
    d = [topo.distance(0, v) for v in range(1, topo.n)]
    assert max(d) <= 3.0 + 1e-9


def test_power_for_strong_range_round_trip():
    power = power_for_strong_range(11.0, alpha=3.0, beta=2.0, noise=0.5, eps=0.1)
    params = SinrParams(alpha=3.0, beta=2.0, noise=0.5, power=power, eps=0.1)
    assert math.isclose(transmission_range(params).strong, 11.0, rel_tol=1e-12)
