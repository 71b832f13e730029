"""End-to-end checks of the whole stack at fixed, scaled-down sizes.

Each test pins one externally visible guarantee: the decode oracle against
a from-scratch formula, the brute-force progress bound, the Monte Carlo
estimator against exact enumeration, the ruling-set election, spacing
growth in oracle mode, delivery and latency of the local broadcast layer,
the epoch burst guarantee, the relay protocols, and bit-for-bit
reproducibility of harness outputs.

Every threshold and seed count sits next to its assert. The full module
takes several minutes single-core; the heavy runs (full acknowledgment
windows, hundred-seed relay suites) dominate.
"""

import hashlib
import itertools
import math
import statistics
import time

import numpy as np
import pytest

from sinrcast.experiments import (
    ExperimentConfig,
    _run_ack_latency,
    _run_approg_latency,
    _run_mmb,
    _run_smb,
    build_topology,
    run_experiment,
)
from sinrcast.graphs import approx_graph, strong_graph
from sinrcast.lowerbound import brute_force_progress_lb, gen_two_line_lb
from sinrcast.model import SinrParams, is_received, lambda_ratio, received_from
from sinrcast.progress import ApprogParams, epoch_run, oracle_substitution_run, run_mis_on_graph
from sinrcast.reliability import ReliabilityParams, exact_reliability, mc_reliability, reliability_graph
from sinrcast.topogen import gen_uniform, power_for_strong_range


def wilson_lower(successes, trials, z=1.96):
    """Lower end of the Wilson score interval for a binomial fraction."""
    if trials == 0:
        return 0.0
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = phat + z * z / (2 * trials)
    spread = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4 * trials * trials))
    return (center - spread) / denom


def _connected(topo, graph):
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in graph.neighbors(v):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == topo.n


def _tree_digest(root):
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(path.read_bytes())
    return h.hexdigest()


# the exhaustive decode sweep shared by the first two tests
SWEEP_PARAMS = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=30.0, eps=0.1)
SWEEP_TOPOS = 200


def _sweep_topology(index, rng):
    n = int(rng.integers(2, 9))
    return gen_uniform(n, 5.0, seed=90_000 + index)


def test_decode_oracle_matches_direct_formula():
    # 200 random layouts of at most 8 nodes, every (receiver, sender,
    # sender-set) triple, zero tolerance, and the whole sweep under a minute.
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    checked = 0
    for t in range(SWEEP_TOPOS):
        topo = _sweep_topology(t, rng)
        ids = list(topo.ids)
        for r in range(1, len(ids) + 1):
            for senders in itertools.combinations(ids, r):
                sset = set(senders)
                for recv in ids:
                    if recv in sset:
                        continue
                    noise_plus = SWEEP_PARAMS.noise + sum(
                        SWEEP_PARAMS.power / topo.distance(recv, w) ** SWEEP_PARAMS.alpha
                        for w in senders
                    )
                    for snd in senders:
                        sig = SWEEP_PARAMS.power / topo.distance(recv, snd) ** SWEEP_PARAMS.alpha
                        ratio = sig / (noise_plus - sig)
                        expect = ratio >= SWEEP_PARAMS.beta * (1.0 - 1e-9)
                        assert is_received(recv, snd, sset, topo, SWEEP_PARAMS) == expect
                        checked += 1
    elapsed = time.perf_counter() - start
    assert checked > 100_000
    assert elapsed < 60.0


def test_at_most_one_sender_decodes_per_slot():
    # same sweep, counting decodable senders per listener: never two, and
    # received_from agrees with the unique decodable sender when there is one
    rng = np.random.default_rng(11)
    for t in range(SWEEP_TOPOS):
        topo = _sweep_topology(t, rng)
        ids = list(topo.ids)
        for r in range(1, len(ids) + 1):
            for senders in itertools.combinations(ids, r):
                sset = set(senders)
                for recv in ids:
                    if recv in sset:
                        continue
                    decodable = [
                        snd for snd in senders
                        if is_received(recv, snd, sset, topo, SWEEP_PARAMS)
                    ]
                    assert len(decodable) <= 1
                    got = received_from(recv, sset, topo, SWEEP_PARAMS)
                    assert got == (decodable[0] if decodable else None)


def test_progress_lower_bound_is_one_slot_per_link():
    # the paired-lines construction pins the brute force at exactly one
    # simultaneous cross reception for widths 2 through 5, in under 10 s
    start = time.perf_counter()
    for delta in (2, 3, 4, 5):
        topo, params = gen_two_line_lb(delta)
        out = brute_force_progress_lb(topo, params)
        assert out.max_decoded == 1
        assert out.subsets_checked == 1 << (2 * delta)
        # the witness is a single sender-line node heard by its opposite
        assert len(out.witness) == 1
        assert out.witness[0] < delta
    assert time.perf_counter() - start < 10.0


def test_monte_carlo_tracks_exact_reliability():
    # 100 random (members, receiver, sender) cases with at most 10 members;
    # a million-trial estimate must sit within 4 sigma of the exact value in
    # at least 95 of them
    rng = np.random.default_rng(23)
    rel = ReliabilityParams(p=0.5, mu=0.05, gamma=0.5)
    params = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=80.0, eps=0.1)
    trials = 10**6
    hits = 0
    for case in range(100):
        n = int(rng.integers(4, 13))
        topo = gen_uniform(n, 7.0, seed=50_000 + case)
        size = int(rng.integers(3, min(10, n) + 1))
        members = sorted(rng.choice(n, size=size, replace=False).tolist())
        snd, recv = rng.choice(members, size=2, replace=False).tolist()
        exact = exact_reliability(recv, snd, members, topo, params, rel)
        est = mc_reliability(recv, snd, members, topo, params, rel, trials, seed=case)
        sigma = math.sqrt(exact * (1.0 - exact) / trials)
        if abs(est - exact) <= 4.0 * sigma:
            hits += 1
    assert hits >= 95


def test_election_maximal_on_oracle_graphs():
    # 100 bounded-density layouts, dependable-link graphs from the exact
    # reliability oracle, unique labels: the elected set must be maximal
    # (independence is asserted inside the election after every phase)
    rng = np.random.default_rng(31)
    rel = ReliabilityParams(p=0.5, mu=0.02, gamma=0.5)
    params = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=30.0, eps=0.1)
    for t in range(100):
        n = int(rng.integers(10, 17))
        topo = gen_uniform(n, math.sqrt(n) * 1.9, seed=60_000 + t)
        g = reliability_graph(topo, params, rel)
        perm = rng.permutation(n)
        labels = {v: int(perm[i]) for i, v in enumerate(topo.ids)}
        run = run_mis_on_graph(g, labels, label_range=n)
        covered = set(run.selected)
        for v in run.selected:
            covered |= set(g.neighbors(v))
        assert covered == set(topo.ids)
        for v in run.selected:
            assert not (set(g.neighbors(v)) & run.selected)


def test_oracle_mode_spacing_more_than_doubles():
    # 50 random instances; with the per-phase calibrated threshold the
    # surviving-member spacing must more than double every phase until the
    # survivors are further apart than the strong range (or down to one)
    rng = np.random.default_rng(47)
    params = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=250.0, eps=0.1)
    strong = 4.5
    aparams = ApprogParams()
    doubling_steps = 0
    for t in range(50):
        n = int(rng.integers(10, 17))
        topo = gen_uniform(n, 6.0, seed=70_000 + t)
        phases = oracle_substitution_run(topo, params, aparams, list(topo.ids))
        assert phases
        for prev, cur in zip(phases, phases[1:]):
            assert cur.min_spacing > 2.0 * prev.min_spacing
            doubling_steps += 1
        last = phases[-1].selected
        if len(last) >= 2:
            spacing = min(
                topo.distance(a, b) for a, b in itertools.combinations(sorted(last), 2)
            )
            assert spacing > strong
    assert doubling_steps >= 50  # the sweep actually exercised the chain


# local broadcast at desk scale: 40 nodes in a 14x14 box keeps the
# strong-graph degree at 20 or below for every seed used here
ACK_PARAMS = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=250.0, eps=0.1)
ACK_UNIFORM = ExperimentConfig(
    kind="ack-latency",
    seeds=tuple(range(200)),
    topology={"generator": "uniform", "n": 40, "width": 14.0, "seed": None},
    sinr=ACK_PARAMS,
)


def test_broadcast_reaches_all_strong_neighbors():
    # 200 seeds; every strong neighbor of the designated broadcaster must
    # hear it before the halt; Wilson 95% lower bound at least 0.84
    successes = 0
    for seed in ACK_UNIFORM.seeds:
        topo, params = build_topology(ACK_UNIFORM, seed)
        g = strong_graph(topo, params)
        assert max(len(g.neighbors(v)) for v in topo.ids) <= 20
        rec, _, _ = _run_ack_latency(ACK_UNIFORM, seed)
        successes += int(rec.success)
    assert wilson_lower(successes, len(ACK_UNIFORM.seeds)) >= 0.84


def test_ack_latency_growth_under_degree_doubling():
    # hub-and-ring cliques of 5, 9 and 17 nodes: degree doubles while the
    # range-to-spacing ratio stays fixed at 4; the measured time to the
    # acknowledgment may grow at most 4x per doubling (50 seeds each)
    power = power_for_strong_range(4.0, 3.0, 2.0, 1.0, 0.1)
    params = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=power, eps=0.1)
    medians = {}
    for k in (4, 8, 16):
        radius = max(1.0, 1.0 / (2.0 * math.sin(math.pi / k)))
        cfg = ExperimentConfig(
            kind="ack-latency",
            seeds=tuple(range(50)),
            topology={"generator": "ring", "k": k, "radius": radius},
            sinr=params,
            extra={"stop_early": False},
        )
        topo, p = build_topology(cfg, 0)
        g = strong_graph(topo, p)
        assert max(len(g.neighbors(v)) for v in topo.ids) == k
        assert lambda_ratio(topo, p) == pytest.approx(4.0)
        lats = []
        for seed in cfg.seeds:
            rec, _, _ = _run_ack_latency(cfg, seed)
            assert rec.success
            lats.append(rec.ack_map()[0])
        medians[k] = statistics.median(lats)
    assert medians[8] <= 4.0 * medians[4]
    assert medians[16] <= 4.0 * medians[8]


def test_burst_from_strong_origin_lands_within_epoch():
    # 200 seeded epochs at the wider slack setting: a silent listener whose
    # approximate-range neighbors are all broadcasting must hear a burst
    # originating inside its strong range; Wilson lower bound at least 0.72
    params = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=250.0, eps=0.2)
    aparams = ApprogParams()
    successes = 0
    for seed in range(200):
        topo = gen_uniform(24, 9.0, seed=80_000 + seed)
        assert topo.n <= 80
        sg = strong_graph(topo, params)
        ag = approx_graph(topo, params)
        listener = min(topo.ids, key=lambda v: (-len(ag.neighbors(v)), v))
        assert ag.neighbors(listener)  # the premise: a broadcasting neighbor
        initiators = {v: f"pl-{v}" for v in topo.ids if v != listener}
        res = epoch_run(topo, params, aparams, initiators, seed=seed, record_slots=False)
        strong_set = sg.neighbors(listener)
        if any(origin in strong_set for _, origin, _ in res.bursts[listener]):
            successes += 1
    assert wilson_lower(successes, 200) >= 0.72


def test_epoch_latency_beats_half_ack_latency():
    # hex disc of 91 nodes: hub degree 90, range-to-spacing ratio 5.5; over
    # 50 seeds the median epoch latch must undercut half the median time to
    # the acknowledgment
    power = power_for_strong_range(5.5, 3.0, 2.0, 1.0, 0.1)
    params = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=power, eps=0.1)
    topology = {"generator": "hex_disc", "rings": 5}

    cfg_ack = ExperimentConfig(
        kind="ack-latency",
        seeds=tuple(range(50)),
        topology=topology,
        sinr=params,
        extra={"stop_early": False},
    )
    topo, p = build_topology(cfg_ack, 0)
    g = strong_graph(topo, p)
    assert max(len(g.neighbors(v)) for v in topo.ids) >= 64
    assert lambda_ratio(topo, p) <= 16.0

    ack_lats = []
    for seed in cfg_ack.seeds:
        rec, _, _ = _run_ack_latency(cfg_ack, seed)
        assert rec.success
        ack_lats.append(rec.ack_map()[0])

    cfg_ap = ExperimentConfig(
        kind="approg-latency",
        seeds=tuple(range(50)),
        topology=topology,
        sinr=params,
    )
    ap_lats = []
    for seed in cfg_ap.seeds:
        rec, _, _ = _run_approg_latency(cfg_ap, seed)
        assert rec.success
        ap_lats.append(rec.completion_slot)

    assert statistics.median(ap_lats) < statistics.median(ack_lats) / 2.0


# the single-message relay suite: shared by the completion-rate test and
# the rcv-filter invariance test so the expensive pass runs once
SMB_PARAMS = SinrParams(
    alpha=3.0, beta=2.0, noise=1.0,
    power=power_for_strong_range(3.0, 3.0, 2.0, 1.0, 0.1), eps=0.1,
)
SMB_BASE = ExperimentConfig(
    kind="smb",
    seeds=(0,),
    topology={"generator": "uniform", "n": 16, "width": 6.5, "seed": None},
    sinr=SMB_PARAMS,
)


@pytest.fixture(scope="module")
def smb_outcomes():
    seeds = []
    seed = 0
    while len(seeds) < 100:
        topo, params = build_topology(SMB_BASE, seed)
        if _connected(topo, strong_graph(topo, params)):
            seeds.append(seed)
        seed += 1
    outcomes = {}
    for s in seeds:
        rec, _, _ = _run_smb(SMB_BASE, s)
        outcomes[s] = rec.success
    return outcomes


def test_single_message_relay_completion_rate(smb_outcomes):
    # 100 connected instances, one source: at least 95 full deliveries
    assert len(smb_outcomes) == 100
    assert sum(smb_outcomes.values()) >= 95


def test_relay_outcomes_ignore_rcv_filter(smb_outcomes):
    # rerunning the same 100 seeds with receptions restricted to strong
    # origins must succeed on exactly the same seeds
    import dataclasses

    strict = dataclasses.replace(SMB_BASE, rcv_filter_strong_only=True)
    for s, want in sorted(smb_outcomes.items()):
        rec, _, _ = _run_smb(strict, s)
        assert rec.success == want


def test_multi_message_relay_completion_rate():
    # 100 connected instances, four sources: at least 90 runs deliver all
    # four messages everywhere
    power = power_for_strong_range(2.5, 3.0, 2.0, 1.0, 0.1)
    params = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=power, eps=0.1)
    cfg = ExperimentConfig(
        kind="mmb",
        seeds=(0,),
        topology={"generator": "uniform", "n": 12, "width": 5.2, "seed": None},
        sinr=params,
        extra={"sources": {"count": 4}},
    )
    seeds = []
    seed = 0
    while len(seeds) < 100:
        topo, p = build_topology(cfg, seed)
        if _connected(topo, strong_graph(topo, p)):
            seeds.append(seed)
        seed += 1
    successes = 0
    for s in seeds:
        rec, _, _ = _run_mmb(cfg, s)
        successes += int(rec.success)
    assert successes >= 90


def test_relay_latency_scales_linearly_with_depth():
    # unit-spaced lines whose approximate-range graph has diameter 3, 6 and
    # 12: the median completion may grow at most 2.5x per doubling (30 seeds)
    params = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=6.75, eps=0.1)
    medians = {}
    for depth in (3, 6, 12):
        cfg = ExperimentConfig(
            kind="smb",
            seeds=tuple(range(30)),
            topology={"generator": "line", "n": depth + 1, "spacing": 1.0},
            sinr=params,
            extra={"source": 0},
        )
        comps = []
        for seed in cfg.seeds:
            rec, _, _ = _run_smb(cfg, seed)
            assert rec.success
            comps.append(rec.completion_slot)
        medians[depth] = statistics.median(comps)
    assert medians[6] <= 2.5 * medians[3]
    assert medians[12] <= 2.5 * medians[6]


def test_rerun_outputs_byte_identical(tmp_path):
    # three experiment kinds, each run twice into fresh directories: the
    # full output trees must hash identically
    line_params = SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=30.0, eps=0.1)
    configs = {
        "lower-bound": ExperimentConfig(
            kind="lower-bound",
            seeds=(0,),
            topology={"generator": "two_line_lb", "delta": 3},
        ),
        "ack-latency": ExperimentConfig(
            kind="ack-latency",
            seeds=(0, 1),
            topology={"generator": "line", "n": 3, "spacing": 1.0},
            sinr=line_params,
            record_slots=True,
        ),
        "oracle-substitution": ExperimentConfig(
            kind="oracle-substitution",
            seeds=(0, 1),
            topology={"generator": "uniform", "n": 10, "width": 6.0, "seed": 5},
            sinr=SinrParams(alpha=3.0, beta=2.0, noise=1.0, power=250.0, eps=0.1),
        ),
    }
    for name, cfg in configs.items():
        digests = []
        for attempt in ("a", "b"):
            out = tmp_path / f"{name}-{attempt}"
            run_experiment(cfg, out)
            digests.append(_tree_digest(out))
        assert digests[0] == digests[1]
