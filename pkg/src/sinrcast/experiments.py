"""Seeded experiment runs: configs in, metrics/events/summary files out.

Six experiment kinds share one driver. Each seed produces a MetricsRecord;
the driver writes metrics.csv (one row per seed plus mean/median/p95
aggregate rows), events.jsonl (one JSON object per line), summary.txt, a
resolved config.json echo, and optionally per-seed engine traces. All
outputs are deterministic functions of the config, so identical configs
give byte-identical files.

Slot durations in metrics are inclusive counts from the arrival slot: an
event in the very slot a message arrived scores 1, never 0.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .engine import Engine
from .graphs import approx_graph, strong_graph
from .lowerbound import brute_force_progress_lb, gen_two_line_lb
from .mac import MacAutomaton, MacParams, mac_plan
from .model import SinrParams, Topology, lambda_ratio, transmission_range
from .progress import ApprogParams, epoch_run, oracle_substitution_run, plan_epoch
from .protocols import check_protocol_invariants, run_multi_source, run_single_source
from .topogen import (
    gen_hex_disc,
    gen_line,
    gen_ring_with_center,
    gen_uniform,
    power_for_strong_range,
)

__all__ = [
    "CONFIG_SCHEMA_VERSION",
    "ExperimentConfig",
    "KINDS",
    "MetricsRecord",
    "build_topology",
    "config_from_mapping",
    "run_experiment",
]

KINDS = (
    "ack-latency",
    "approg-latency",
    "smb",
    "mmb",
    "lower-bound",
    "oracle-substitution",
)

GENERATORS = ("uniform", "line", "ring", "hex_disc", "two_line_lb")

CONFIG_SCHEMA_VERSION = 1

METRIC_COLUMNS = (
    "seed",
    "success",
    "tracked",
    "acks",
    "ack_min",
    "ack_median",
    "ack_max",
    "rcvs",
    "rcv_min",
    "rcv_median",
    "rcv_max",
    "completion",
)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seeds: Tuple[int, ...]
    topology: Mapping[str, Any]
    sinr: Optional[SinrParams] = None
    ack_eps: float = 0.1
    approg: ApprogParams = field(default_factory=ApprogParams)
    rcv_filter_strong_only: bool = False
    record_slots: bool = False
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ValueError("seeds must be nonempty")
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be unique")
        object.__setattr__(self, "seeds", seeds)
        topo = dict(self.topology)
        gen = topo.get("generator")
        if gen not in GENERATORS:
            raise ValueError(f"unknown topology generator {gen!r}")
        object.__setattr__(self, "topology", topo)
        if self.sinr is None and gen != "two_line_lb":
            raise ValueError("sinr params required for this generator")
        if not 0.0 < self.ack_eps < 0.5:
            raise ValueError(f"ack_eps must lie in (0, 1/2), got {self.ack_eps}")
        object.__setattr__(self, "extra", dict(self.extra))

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "kind": self.kind,
            "seeds": list(self.seeds),
            "topology": dict(self.topology),
            "sinr": None if self.sinr is None else asdict(self.sinr),
            "ack_eps": self.ack_eps,
            "approg": asdict(self.approg),
            "rcv_filter_strong_only": self.rcv_filter_strong_only,
            "record_slots": self.record_slots,
            "extra": dict(self.extra),
        }


def config_from_mapping(data: Mapping[str, Any]) -> ExperimentConfig:
    """Build a validated config from parsed file content."""
    if not isinstance(data, Mapping):
        raise ValueError("config root must be a mapping")
    version = data.get("schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        raise ValueError(
            f"config schema_version must be {CONFIG_SCHEMA_VERSION}, got {version!r}"
        )
    known = {
        "schema_version",
        "kind",
        "seeds",
        "topology",
        "sinr",
        "ack_eps",
        "approg",
        "rcv_filter_strong_only",
        "record_slots",
        "extra",
    }
    stray = sorted(set(data) - known)
    if stray:
        raise ValueError(f"unknown config keys: {', '.join(stray)}")
    sinr = None
    if data.get("sinr") is not None:
        sdict = dict(data["sinr"])
        if "strong_range" in sdict:
            if "power" in sdict:
                raise ValueError("give either power or strong_range, not both")
            strong = sdict.pop("strong_range")
            sdict["power"] = power_for_strong_range(
                strong,
                alpha=sdict["alpha"],
                beta=sdict["beta"],
                noise=sdict["noise"],
                eps=sdict.get("eps", 0.1),
            )
        sinr = SinrParams(**sdict)
    approg = ApprogParams(**dict(data.get("approg") or {}))
    return ExperimentConfig(
        kind=data.get("kind"),
        seeds=tuple(data.get("seeds") or ()),
        topology=dict(data.get("topology") or {}),
        sinr=sinr,
        ack_eps=float(data.get("ack_eps", 0.1)),
        approg=approg,
        rcv_filter_strong_only=bool(data.get("rcv_filter_strong_only", False)),
        record_slots=bool(data.get("record_slots", False)),
        extra=dict(data.get("extra") or {}),
    )


@dataclass(frozen=True)
class MetricsRecord:
    """Per-seed outcome. Durations are inclusive slot counts (>= 1)."""

    seed: int
    success: bool
    ack_slots: Tuple[Tuple[int, Optional[int]], ...]
    rcv_slots: Tuple[Tuple[int, Optional[int]], ...]
    completion_slot: Optional[int]

    def __post_init__(self):
        for label, rows in (("ack", self.ack_slots), ("rcv", self.rcv_slots)):
            for node, val in rows:
                if val is not None and val < 1:
                    raise ValueError(
                        f"{label} duration for node {node} is {val}; must be >= 1"
                    )
        achieved = [v for _, v in self.rcv_slots if v is not None]
        if self.completion_slot is not None:
            if self.completion_slot < 1:
                raise ValueError("completion duration must be >= 1")
            if achieved and self.completion_slot < max(achieved):
                raise ValueError("completion earlier than a first reception")

    def rcv_map(self) -> Dict[int, Optional[int]]:
        return dict(self.rcv_slots)

    def ack_map(self) -> Dict[int, Optional[int]]:
        return dict(self.ack_slots)


# ---------------------------------------------------------------------------
# topology plumbing


def build_topology(
    cfg: ExperimentConfig, run_seed: int
) -> Tuple[Topology, SinrParams]:
    """Materialize the configured topology for one seeded run.

    A generator seed of None defers to the run seed, giving a fresh layout
    per run; a fixed integer pins the same layout for every seed.
    """
    spec = dict(cfg.topology)
    gen = spec.pop("generator")
    try:
        if gen == "uniform":
            gseed = spec.pop("seed", None)
            topo = gen_uniform(
                n=spec.pop("n"),
                width=spec.pop("width"),
                height=spec.pop("height", None),
                seed=run_seed if gseed is None else gseed,
                min_spacing=spec.pop("min_spacing", 1.0),
            )
        elif gen == "line":
            topo = gen_line(n=spec.pop("n"), spacing=spec.pop("spacing", 1.0))
        elif gen == "ring":
            topo = gen_ring_with_center(k=spec.pop("k"), radius=spec.pop("radius"))
        elif gen == "hex_disc":
            topo = gen_hex_disc(
                rings=spec.pop("rings"), spacing=spec.pop("spacing", 1.0)
            )
        elif gen == "two_line_lb":
            topo, params = gen_two_line_lb(spec.pop("delta"))
            if spec:
                raise ValueError(f"unused topology keys: {sorted(spec)}")
            return topo, params
        else:  # pragma: no cover - guarded in __post_init__
            raise ValueError(f"unknown generator {gen!r}")
    except KeyError as missing:
        raise ValueError(f"topology spec is missing {missing}") from None
    if spec:
        raise ValueError(f"unused topology keys: {sorted(spec)}")
    assert cfg.sinr is not None
    return topo, cfg.sinr


def _strong_degrees(topo: Topology, params: SinrParams) -> Dict[int, int]:
    g = strong_graph(topo, params)
    return {v: len(g.neighbors(v)) for v in topo.ids}


def _designated_node(topo: Topology, params: SinrParams) -> int:
    """Max dependable-degree node, lowest id breaking ties."""
    deg = _strong_degrees(topo, params)
    return min(topo.ids, key=lambda v: (-deg[v], v))


def _resolve_nodes(spec, topo: Topology, params: SinrParams, default: List[int]):
    if spec is None:
        return list(default)
    if spec == "all":
        return list(topo.ids)
    if isinstance(spec, Mapping) and set(spec) == {"count"}:
        k = int(spec["count"])
        if not 1 <= k <= topo.n:
            raise ValueError(f"count {k} out of range for {topo.n} nodes")
        deg = _strong_degrees(topo, params)
        ranked = sorted(topo.ids, key=lambda v: (-deg[v], v))
        return sorted(ranked[:k])
    nodes = [int(v) for v in spec]
    for v in nodes:
        topo._check_id(v)
    if len(set(nodes)) != len(nodes):
        raise ValueError("node list has duplicates")
    return nodes


def _allowed_origins(topo, params, mparams) -> Dict[int, Optional[set]]:
    if not mparams.rcv_filter_strong_only:
        return {v: None for v in topo.ids}
    g = strong_graph(topo, params)
    return {v: set(g.neighbors(v)) for v in topo.ids}


# ---------------------------------------------------------------------------
# per-kind runners


class _ProbeMac(MacAutomaton):
    """MacAutomaton that records first receptions and can stop the engine.

    watch_mid narrows attention to a single message id; watch_any accepts
    anything. When stop_on_watch is set the node reports done as soon as
    its watched reception lands, letting the engine cut the run short once
    every watcher is satisfied.
    """

    def __init__(
        self,
        node_id,
        plan,
        seed,
        allowed_origins=None,
        watch_mid=None,
        watch_any=False,
        stop_on_watch=False,
    ):
        super().__init__(node_id, plan, seed, allowed_origins=allowed_origins)
        self.watch_mid = watch_mid
        self.watch_any = watch_any
        self.first_rcv: Dict[Any, int] = {}
        if not (watch_any or watch_mid is not None):
            self.done = True
        self._stop_on_watch = stop_on_watch

    def handle_rcv(self, slot: int, origin: int, mid: Any, payload: Any) -> None:
        if mid not in self.first_rcv:
            self.first_rcv[mid] = slot
        if self.watch_any or mid == self.watch_mid:
            if self._stop_on_watch:
                self.done = True


def _mac_events_json(seed: int, automata) -> List[Dict[str, Any]]:
    lines = []
    for a in automata:
        for e in a.events:
            lines.append(
                {
                    "type": "mac",
                    "seed": seed,
                    "slot": int(e.slot),
                    "node": int(e.node),
                    "kind": e.kind,
                    "mid": str(e.mid),
                    "origin": int(e.origin),
                }
            )
    lines.sort(key=lambda d: (d["slot"], d["node"], d["kind"]))
    return lines


def _first_ack_durations(automata, sources) -> List[Tuple[int, Optional[int]]]:
    out = []
    for v in sources:
        acks = [e.slot for e in automata[v].events if e.kind == "ack"]
        out.append((v, min(acks) + 1 if acks else None))
    return out


def _run_ack_latency(cfg: ExperimentConfig, seed: int):
    topo, params = build_topology(cfg, seed)
    mparams = MacParams(
        ack_eps=cfg.ack_eps,
        approg=cfg.approg,
        rcv_filter_strong_only=cfg.rcv_filter_strong_only,
        ack_degree_coeff=float(cfg.extra.get("ack_degree_coeff", 32.0)),
        ack_log_coeff=float(cfg.extra.get("ack_log_coeff", 384.0)),
    )
    plan = mac_plan(topo, params, mparams)
    window = plan.guarantees.ack_window

    designated = cfg.extra.get("source")
    if designated is None:
        designated = _designated_node(topo, params)
    sources = _resolve_nodes(cfg.extra.get("sources"), topo, params, [designated])
    if designated not in sources:
        raise ValueError(f"designated source {designated} is not broadcasting")

    target_mode = cfg.extra.get("targets", "neighbors")
    if target_mode == "neighbors":
        targets = sorted(strong_graph(topo, params).neighbors(designated))
        if not targets:
            raise ValueError(f"node {designated} has no dependable neighbors")
        watch_mid, watch_any = f"m{designated}", False
    elif target_mode == "all":
        targets = list(topo.ids)
        watch_mid, watch_any = None, True
    else:
        targets = _resolve_nodes(target_mode, topo, params, [])
        if not targets:
            raise ValueError("explicit target list is empty")
        watch_mid, watch_any = f"m{designated}", False
    tset = set(targets)

    stop_early = bool(cfg.extra.get("stop_early", True))
    horizon = int(cfg.extra.get("max_slots", window + 2))
    allowed = _allowed_origins(topo, params, mparams)
    automata = [
        _ProbeMac(
            v,
            plan,
            seed,
            allowed_origins=allowed[v],
            watch_mid=watch_mid if v in tset else None,
            watch_any=watch_any and v in tset,
            stop_on_watch=stop_early,
        )
        for v in topo.ids
    ]
    env = {0: [(v, ("bcast", f"m{v}", f"payload-{v}")) for v in sorted(sources)]}
    eng = Engine(
        topo,
        params,
        automata,
        max_slots=horizon,
        env_schedule=env,
        record_slots=cfg.record_slots,
    )
    trace = eng.run()

    rcv_rows: List[Tuple[int, Optional[int]]] = []
    for v in targets:
        got = automata[v].first_rcv
        if watch_any:
            slot = min(got.values()) if got else None
        else:
            slot = got.get(watch_mid)
        rcv_rows.append((v, None if slot is None else slot + 1))
    achieved = [d for _, d in rcv_rows if d is not None]
    complete = len(achieved) == len(rcv_rows)
    success = complete and max(achieved) <= window + 1
    record = MetricsRecord(
        seed=seed,
        success=success,
        ack_slots=tuple(_first_ack_durations(automata, sorted(sources))),
        rcv_slots=tuple(rcv_rows),
        completion_slot=max(achieved) if complete else None,
    )
    events = _mac_events_json(seed, automata)
    events.append(
        {
            "type": "plan",
            "seed": seed,
            "ack_window": window,
            "designated": int(designated),
            "targets": [int(t) for t in targets],
            "horizon": horizon,
        }
    )
    return record, events, trace


def _run_approg_latency(cfg: ExperimentConfig, seed: int):
    topo, params = build_topology(cfg, seed)
    lam = lambda_ratio(topo, params)
    layout = plan_epoch(cfg.approg, lam, params.alpha)

    default_init = [_designated_node(topo, params)]
    initiators = _resolve_nodes(cfg.extra.get("initiators"), topo, params, default_init)
    payloads = {v: f"payload-{v}" for v in initiators}

    tspec = cfg.extra.get("targets", "approx-neighbors")
    if tspec == "approx-neighbors":
        g = approx_graph(topo, params)
        targets = sorted(
            set().union(*(g.neighbors(v) for v in initiators)) - set(initiators)
        )
        if not targets:
            raise ValueError("no listener sits within the approximate range")
    elif tspec == "all":
        targets = sorted(set(topo.ids) - set(initiators))
    else:
        targets = _resolve_nodes(tspec, topo, params, [])
    listener = cfg.extra.get("listener")
    if listener is None:
        listener = targets[0]
    if listener not in targets:
        raise ValueError(f"designated listener {listener} is not a target")

    res = epoch_run(
        topo,
        params,
        cfg.approg,
        payloads,
        seed,
        layout=layout,
        record_slots=cfg.record_slots,
    )
    rcv_rows = []
    for v in targets:
        hit = res.latched[v]
        rcv_rows.append((v, None if hit is None else hit[0] + 1))
    achieved = [d for _, d in rcv_rows if d is not None]
    complete = len(achieved) == len(rcv_rows)
    record = MetricsRecord(
        seed=seed,
        success=res.latched[listener] is not None,
        ack_slots=(),
        rcv_slots=tuple(rcv_rows),
        completion_slot=max(achieved) if complete else None,
    )
    events = [
        {
            "type": "latch",
            "seed": seed,
            "node": int(v),
            "epoch_slot": int(res.latched[v][0]),
            "origin": int(res.latched[v][1]),
        }
        for v in sorted(topo.ids)
        if res.latched[v] is not None
    ]
    events.append(
        {
            "type": "epoch-layout",
            "seed": seed,
            "epoch_len": layout.epoch_len,
            "levels": layout.levels,
            "round_slots": layout.round_slots,
            "burst_len": layout.burst_len,
            "listener": int(listener),
            "initiators": [int(v) for v in sorted(initiators)],
        }
    )
    return record, events, res.trace


def _relay_metrics(run, seed: int, mids: List[str], arrivals_by_node) -> MetricsRecord:
    rcv_rows = []
    for a in run.automata:
        v = a.node_id
        slots = [slot for slot, _ in a.delivered]
        rcv_rows.append((v, min(slots) + 1 if slots else None))
    completion = None
    per_mid = [run.completion_slot(mid) for mid in mids]
    if all(c is not None for c in per_mid):
        completion = max(per_mid) + 1
    return MetricsRecord(
        seed=seed,
        success=completion is not None,
        ack_slots=tuple(_first_ack_durations(run.automata, sorted(arrivals_by_node))),
        rcv_slots=tuple(rcv_rows),
        completion_slot=completion,
    )


def _delivery_events(run, seed: int) -> List[Dict[str, Any]]:
    lines = []
    for a in run.automata:
        for slot, mid in a.delivered:
            lines.append(
                {
                    "type": "delivery",
                    "seed": seed,
                    "node": int(a.node_id),
                    "mid": str(mid),
                    "slot": int(slot),
                }
            )
    lines.sort(key=lambda d: (d["slot"], d["node"], d["mid"]))
    return lines


def _run_smb(cfg: ExperimentConfig, seed: int):
    topo, params = build_topology(cfg, seed)
    mparams = MacParams(
        ack_eps=cfg.ack_eps,
        approg=cfg.approg,
        rcv_filter_strong_only=cfg.rcv_filter_strong_only,
    )
    plan = mac_plan(topo, params, mparams)
    source = cfg.extra.get("source")
    if source is None:
        source = _designated_node(topo, params)
    horizon = int(cfg.extra.get("max_slots", 8 * plan.guarantees.ack_window))
    run = run_single_source(
        topo,
        params,
        plan,
        source=source,
        payload="blob",
        seed=seed,
        max_slots=horizon,
        mid="m0",
        record_slots=cfg.record_slots,
    )
    check_protocol_invariants(run)
    record = _relay_metrics(run, seed, ["m0"], [source])
    events = _mac_events_json(seed, run.automata) + _delivery_events(run, seed)
    return record, events, run.trace


def _run_mmb(cfg: ExperimentConfig, seed: int):
    topo, params = build_topology(cfg, seed)
    mparams = MacParams(
        ack_eps=cfg.ack_eps,
        approg=cfg.approg,
        rcv_filter_strong_only=cfg.rcv_filter_strong_only,
    )
    plan = mac_plan(topo, params, mparams)
    default_sources = [_designated_node(topo, params)]
    sources = _resolve_nodes(cfg.extra.get("sources"), topo, params, default_sources)
    arrivals = [(0, v, f"m{v}", f"payload-{v}") for v in sorted(sources)]
    horizon = int(
        cfg.extra.get("max_slots", 8 * plan.guarantees.ack_window * len(arrivals))
    )
    run = run_multi_source(
        topo,
        params,
        plan,
        arrivals,
        seed,
        max_slots=horizon,
        record_slots=cfg.record_slots,
    )
    check_protocol_invariants(run)
    record = _relay_metrics(run, seed, [m for _, _, m, _ in arrivals], sorted(sources))
    events = _mac_events_json(seed, run.automata) + _delivery_events(run, seed)
    return record, events, run.trace


def _run_lower_bound(cfg: ExperimentConfig, seed: int):
    topo, params = build_topology(cfg, seed)
    out = brute_force_progress_lb(topo, params)
    record = MetricsRecord(
        seed=seed,
        success=out.max_decoded == 1,
        ack_slots=(),
        rcv_slots=(),
        completion_slot=None,
    )
    events = [
        {
            "type": "lower-bound",
            "seed": seed,
            "nodes": topo.n,
            "max_decoded": out.max_decoded,
            "witness": [int(v) for v in out.witness],
            "subsets_checked": out.subsets_checked,
        }
    ]
    return record, events, None


def _run_oracle_substitution(cfg: ExperimentConfig, seed: int):
    topo, params = build_topology(cfg, seed)
    members = _resolve_nodes(cfg.extra.get("members"), topo, params, list(topo.ids))
    phases = oracle_substitution_run(topo, params, cfg.approg, members)
    strong = transmission_range(params).strong

    def spacing(nodes) -> float:
        ids = sorted(nodes)
        if len(ids) < 2:
            return math.inf
        return min(
            topo.distance(u, v) for i, u in enumerate(ids) for v in ids[i + 1 :]
        )

    ok = True
    for ph in phases:
        if spacing(ph.selected) <= ph.cap and len(ph.selected) >= 2:
            ok = False
    last = phases[-1]
    if not (spacing(last.selected) > strong or len(last.selected) < 2):
        ok = False
    record = MetricsRecord(
        seed=seed,
        success=ok,
        ack_slots=(),
        rcv_slots=(),
        completion_slot=None,
    )
    events = [
        {
            "type": "phase",
            "seed": seed,
            "index": i,
            "members": len(ph.members),
            "min_spacing": round(ph.min_spacing, 9),
            "cap": round(ph.cap, 9),
            "mu_star": round(ph.mu_star, 9),
            "selected": sorted(int(v) for v in ph.selected),
        }
        for i, ph in enumerate(phases)
    ]
    return record, events, None


_RUNNERS = {
    "ack-latency": _run_ack_latency,
    "approg-latency": _run_approg_latency,
    "smb": _run_smb,
    "mmb": _run_mmb,
    "lower-bound": _run_lower_bound,
    "oracle-substitution": _run_oracle_substitution,
}


# ---------------------------------------------------------------------------
# output files


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    f = float(x)
    if f.is_integer():
        return str(int(f))
    return f"{f:.6g}"


def _row_values(rec: MetricsRecord) -> Dict[str, Any]:
    acks = [v for _, v in rec.ack_slots if v is not None]
    rcvs = [v for _, v in rec.rcv_slots if v is not None]
    return {
        "seed": rec.seed,
        "success": rec.success,
        "tracked": len(rec.rcv_slots),
        "acks": len(acks),
        "ack_min": min(acks) if acks else None,
        "ack_median": float(np.median(acks)) if acks else None,
        "ack_max": max(acks) if acks else None,
        "rcvs": len(rcvs),
        "rcv_min": min(rcvs) if rcvs else None,
        "rcv_median": float(np.median(rcvs)) if rcvs else None,
        "rcv_max": max(rcvs) if rcvs else None,
        "completion": rec.completion_slot,
    }


def _aggregate_rows(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    aggs = []
    for label, fn in (
        ("mean", lambda v: float(np.mean(v))),
        ("median", lambda v: float(np.median(v))),
        ("p95", lambda v: float(np.percentile(v, 95))),
    ):
        out: Dict[str, Any] = {"seed": label}
        for col in METRIC_COLUMNS[1:]:
            vals = [float(r[col]) for r in rows if r[col] is not None]
            out[col] = fn(vals) if vals else None
        aggs.append(out)
    return aggs


def _write_metrics_csv(path: Path, records: List[MetricsRecord]) -> None:
    rows = [_row_values(r) for r in records]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for row in rows + _aggregate_rows(rows):
            w.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])


def _json_line(obj: Mapping[str, Any]) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _summary_text(cfg: ExperimentConfig, records: List[MetricsRecord]) -> str:
    rows = [_row_values(r) for r in records]
    succ = sum(1 for r in records if r.success)
    lines = [
        f"kind: {cfg.kind}",
        f"seeds: {len(records)}",
        f"success: {succ}/{len(records)}",
    ]
    comps = [r["completion"] for r in rows if r["completion"] is not None]
    if comps:
        lines.append(
            "completion slots: median={} p95={} max={}".format(
                _fmt(float(np.median(comps))),
                _fmt(float(np.percentile(comps, 95))),
                _fmt(max(comps)),
            )
        )
    rcv_meds = [r["rcv_median"] for r in rows if r["rcv_median"] is not None]
    if rcv_meds:
        lines.append(f"median first-reception: {_fmt(float(np.median(rcv_meds)))}")
    if cfg.kind == "lower-bound":
        delta = int(cfg.topology["delta"])
        best = 1 if succ == len(records) else "!=1"
        lines += [
            f"max simultaneous cross receptions over all transmitter subsets: {best}",
            f"implied bound: covering all {delta} dependable cross links takes "
            f"at least {delta} slots",
            "note: the sweep assumes the shared uniform transmit power; "
            "per-node power assignments are not enumerated",
        ]
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig, out_dir) -> List[MetricsRecord]:
    """Run every seed, write the output files, return the records.

    Invariant violations inside a run (engine faults, protocol checks,
    metric consistency) raise; the CLI turns that into a nonzero exit.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = _RUNNERS[cfg.kind]
    records: List[MetricsRecord] = []
    event_lines: List[str] = []
    for seed in cfg.seeds:
        record, events, trace = runner(cfg, seed)
        records.append(record)
        event_lines.extend(_json_line(e) for e in events)
        if trace is not None:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            _write_text(
                tdir / f"seed-{seed:05d}.jsonl",
                "\n".join(trace.jsonl_lines()) + "\n",
            )
    _write_text(out / "config.json", json.dumps(cfg.to_mapping(), sort_keys=True, indent=2) + "\n")
    try:
        _write_metrics_csv(out / "metrics.csv", records)
    except OSError as err:
        raise RuntimeError(f"writing {out / 'metrics.csv'}: {err}") from err
    _write_text(out / "events.jsonl", "\n".join(event_lines) + ("\n" if event_lines else ""))
    _write_text(out / "summary.txt", _summary_text(cfg, records))
    return records


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as err:
        raise RuntimeError(f"writing {path}: {err}") from err
