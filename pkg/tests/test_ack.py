"""Tests for the probability-doubling acknowledged broadcast."""
import math

import numpy as np
import pytest

from sinrcast.ack import (
    AckBroadcastAutomaton,
    AckParams,
    ack_bound,
    ack_init,
    ack_step,
    default_n_estimate,
    doubled_probability,
    fallback_probability,
    halt_budget,
    inner_pass_length,
    probability_floor,
    recv_reset_threshold,
)
from sinrcast.engine import Engine, per_node_rng
from sinrcast.model import SinrParams, Topology, lambda_ratio
from sinrcast.graphs import strong_graph


def ap(eps=0.1, n_estimate=8.0, **kw):
    return AckParams(eps=eps, n_estimate=n_estimate, **kw)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            AckParams(eps=0, n_estimate=4)
        with pytest.raises(ValueError):
            AckParams(eps=0.1, n_estimate=0.5)
        with pytest.raises(ValueError):
            AckParams(eps=0.1, n_estimate=4, inner_factor=0)

    def test_default_estimate(self):
        assert default_n_estimate(2.0) == 16.0


class TestProbabilitySteps:
    def test_init_values(self):
        assert ack_init(ap(n_estimate=8)).p == pytest.approx(1 / 32)
        assert ack_init(ap(n_estimate=1)).p == pytest.approx(1 / 4)

    def test_fallback(self):
        # from the cap with 8 contenders: floor 1/1024 loses to p/32 = 1/512
        assert fallback_probability(1 / 16, 8) == pytest.approx(1 / 512)
        # from low p the floor wins
        assert fallback_probability(1 / 1024, 8) == pytest.approx(1 / 1024)

    def test_doubling_clamps(self):
        assert doubled_probability(1 / 64) == pytest.approx(1 / 32)
        assert doubled_probability(1 / 16) == pytest.approx(1 / 16)
        assert doubled_probability(1 / 20) == pytest.approx(1 / 16)

    def test_first_step_probability(self):
        # entering the loops turns 1/(4n) into 1/(64n)
        params = ap(n_estimate=8)
        st = ack_init(params)
        ack_step(st, params, received=False, draw=0.99)
        assert st.p == pytest.approx(1 / (64 * 8))
        assert st.inner_pos == 1
        assert st.total_p == pytest.approx(st.p)


class TestStepFlow:
    def test_ramp_doubles_after_each_pass(self):
        params = ap(n_estimate=4)
        st = ack_init(params)
        length = inner_pass_length(params)
        ack_step(st, params, False, 0.99)
        first = st.p
        for _ in range(length - 1):
            ack_step(st, params, False, 0.99)
            assert st.p == first  # stable within the pass
        ack_step(st, params, False, 0.99)
        assert st.p == pytest.approx(2 * first)

    def test_probability_window_invariant(self):
        # after entry, p always sits between the floor and the cap
        params = ap(n_estimate=8)
        st = ack_init(params)
        rng = np.random.default_rng(0)
        while not st.halted:
            ack_step(st, params, rng.random() < 0.2, float(rng.random()))
            assert probability_floor(params) - 1e-18 <= st.p <= 1 / 16 + 1e-18

    def test_receive_burst_causes_fallback(self):
        params = ap(n_estimate=8)
        st = ack_init(params)
        # ramp to the cap first
        while st.p < 1 / 16:
            ack_step(st, params, False, 0.99)
        thresh = recv_reset_threshold(params)
        fired = 0
        while st.recv_count <= thresh - 1:
            ack_step(st, params, True, 0.99)
            fired += 1
        before = st.p
        ack_step(st, params, True, 0.99)  # this one crosses the threshold
        assert st.p == pytest.approx(doubled_probability(fallback_probability(before, 8)))
        assert st.recv_count == 0

    def test_halts_on_budget_and_transmits_in_halting_slot(self):
        params = ap(n_estimate=2, inner_factor=2, halt_factor=1)
        st = ack_init(params)
        transmitted_last = None
        steps = 0
        while not st.halted:
            transmitted_last = ack_step(st, params, False, 0.0)  # draw 0: always transmit
            steps += 1
        assert st.total_p > halt_budget(params)
        assert transmitted_last is True
        assert steps > 1

    def test_step_after_halt_raises(self):
        params = ap(n_estimate=2, halt_factor=0.5)
        st = ack_init(params)
        while not st.halted:
            ack_step(st, params, False, 0.99)
        with pytest.raises(RuntimeError):
            ack_step(st, params, False, 0.5)


class TestBound:
    def test_unit_constants(self):
        assert ack_bound(1, 2.0, 0.5, c_degree=1, c_log=1) == 4

    def test_monotone_in_degree(self):
        assert ack_bound(8, 4.0, 0.1) < ack_bound(16, 4.0, 0.1)

    def test_validation(self):
        with pytest.raises(ValueError):
            ack_bound(1, 0.5, 0.1)
        with pytest.raises(ValueError):
            ack_bound(-1, 2.0, 0.1)
        with pytest.raises(ValueError):
            ack_bound(1, 2.0, 0.0)


class TestEndToEnd:
    def test_pair_delivers_and_halts_within_bound(self):
        # two mutual strong neighbors, both broadcasting; each should hear
        # the other before anyone halts, well inside the slot bound
        p = SinrParams(alpha=3, beta=2, noise=1.0, power=250.0, eps=0.2)
        t = Topology([(0, 0), (1, 0)])
        lam = lambda_ratio(t, p)
        params = ap(eps=0.1, n_estimate=default_n_estimate(lam))
        bound = ack_bound(strong_graph(t, p).max_degree(), lam, 0.1)
        ok = 0
        for seed in range(20):
            autos = [
                AckBroadcastAutomaton(params, f"m{v}", per_node_rng(seed, v, "ack"))
                for v in range(2)
            ]
            trace = Engine(t, p, autos, max_slots=bound, record_slots=False).run()
            assert trace.completed_all, "both must halt within the bound"
            if all(a.heard for a in autos):
                first_rx = [min(s for s, _ in a.heard) for a in autos]
                if all(f <= h for f, h in zip(first_rx, [a.halt_slot for a in autos])):
                    ok += 1
        assert ok >= 19  # one bad seed in twenty tolerated
