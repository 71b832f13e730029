"""Command-line surface: topology generation, experiment runs, checks, reports.

Output locations default to the SINRCAST_OUT environment variable when it
is set, the working directory otherwise. Experiment configs are YAML with
a schema_version field; the README documents every key.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import click
import yaml

from .experiments import config_from_mapping, run_experiment
from .lowerbound import brute_force_progress_lb, gen_two_line_lb
from .model import SinrParams, Topology, transmission_range
from .reliability import (
    DEFAULT_EXACT_CAP,
    ReliabilityParams,
    calibrate_mu,
    mc_reliability,
)
from .topogen import (
    gen_hex_disc,
    gen_line,
    gen_ring_with_center,
    gen_uniform,
    power_for_strong_range,
)

OUT_ENV = "SINRCAST_OUT"
TOPOLOGY_SCHEMA_VERSION = 1


def _out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "."))


def _parse_seeds(text: str):
    """Seed lists like '0-99' or '1,2,5' or '0-3,10'."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:  # allow negative singletons, not negative ranges
            lo, hi = part.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise click.BadParameter(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise click.BadParameter("no seeds given")
    return seeds


@click.group()
def main():
    """Slot-synchronous broadcast simulator for interference-limited radios."""


@main.command()
@click.option(
    "--generator",
    type=click.Choice(["uniform", "line", "ring", "hex_disc"]),
    required=True,
)
@click.option("--n", type=int, help="node count (uniform, line)")
@click.option("--width", type=float, help="box width (uniform)")
@click.option("--height", type=float, default=None, help="box height (uniform)")
@click.option("--spacing", type=float, default=1.0, help="gap (line, hex_disc)")
@click.option("--min-spacing", type=float, default=1.0, help="floor (uniform)")
@click.option("--k", type=int, help="ring node count (ring)")
@click.option("--radius", type=float, help="ring radius (ring)")
@click.option("--rings", type=int, help="hex ring count (hex_disc)")
@click.option("--seed", type=int, default=0, help="placement seed (uniform)")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def gen(generator, n, width, height, spacing, min_spacing, k, radius, rings, seed, out_path):
    """Generate a topology and write it as JSON."""
    try:
        if generator == "uniform":
            if n is None or width is None:
                raise ValueError("uniform needs --n and --width")
            topo = gen_uniform(
                n, width, height, seed=seed, min_spacing=min_spacing
            )
            spec = {
                "generator": "uniform",
                "n": n,
                "width": width,
                "height": height,
                "seed": seed,
                "min_spacing": min_spacing,
            }
        elif generator == "line":
            if n is None:
                raise ValueError("line needs --n")
            topo = gen_line(n, spacing)
            spec = {"generator": "line", "n": n, "spacing": spacing}
        elif generator == "ring":
            if k is None or radius is None:
                raise ValueError("ring needs --k and --radius")
            topo = gen_ring_with_center(k, radius)
            spec = {"generator": "ring", "k": k, "radius": radius}
        else:
            if rings is None:
                raise ValueError("hex_disc needs --rings")
            topo = gen_hex_disc(rings, spacing)
            spec = {"generator": "hex_disc", "rings": rings, "spacing": spacing}
    except ValueError as err:
        raise click.ClickException(str(err))

    out = Path(out_path) if out_path else _out_root() / "topology.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "schema_version": TOPOLOGY_SCHEMA_VERSION,
        "generator": spec,
        "n": topo.n,
        "min_spacing": topo.min_distance() if topo.n > 1 else None,
        "positions": [[x, y] for x, y in topo.positions.tolist()],
    }
    out.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    click.echo(f"wrote {out} ({topo.n} nodes)")


def load_topology_file(path) -> Topology:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != TOPOLOGY_SCHEMA_VERSION:
        raise click.ClickException(
            f"{path}: topology schema_version must be {TOPOLOGY_SCHEMA_VERSION}"
        )
    return Topology(doc["positions"])


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="YAML experiment config",
)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--seeds", "seeds_text", default=None, help="override, e.g. '0-99'")
def run(config_path, out_dir, seeds_text):
    """Run a seeded experiment and write metrics, events, and a summary."""
    with open(config_path) as fh:
        data = yaml.safe_load(fh)
    if seeds_text is not None:
        if not isinstance(data, dict):
            raise click.ClickException(f"{config_path}: config root must be a mapping")
        data = {**data, "seeds": _parse_seeds(seeds_text)}
    try:
        cfg = config_from_mapping(data)
    except (ValueError, TypeError) as err:
        raise click.ClickException(f"{config_path}: {err}")
    out = Path(out_dir) if out_dir else _out_root() / Path(config_path).stem
    try:
        run_experiment(cfg, out)
    except (AssertionError, ValueError, RuntimeError) as err:
        raise click.ClickException(f"experiment failed: {err}")
    click.echo((out / "summary.txt").read_text(), nl=False)
    click.echo(f"outputs in {out}")


@main.command("verify-lb")
@click.option(
    "--delta",
    "deltas",
    type=int,
    multiple=True,
    default=(2, 3, 4, 5),
    show_default=True,
)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def verify_lb(deltas, out_path):
    """Exhaustively check the two-line stalled-progress construction."""
    lines = []
    bad = False
    for delta in deltas:
        try:
            topo, params = gen_two_line_lb(delta)
        except ValueError as err:
            raise click.ClickException(str(err))
        res = brute_force_progress_lb(topo, params)
        ok = res.max_decoded == 1
        bad = bad or not ok
        lines.append(
            f"delta={delta}: max simultaneous cross receptions = {res.max_decoded} "
            f"over {res.subsets_checked} transmitter subsets -> "
            f"{'ok, at least ' + str(delta) + ' slots needed' if ok else 'MISMATCH'}"
        )
    lines.append(
        "note: sweep covers the shared uniform transmit power only; "
        "per-node power assignments are not enumerated"
    )
    text = "\n".join(lines) + "\n"
    click.echo(text, nl=False)
    if out_path:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    if bad:
        raise click.ClickException("a sweep disagreed with the predicted bound")


@main.command("calibrate-mu")
@click.option(
    "--topology",
    "topo_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="topology JSON from `gen`",
)
@click.option("--alpha", type=float, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--noise", type=float, required=True)
@click.option("--power", type=float, default=None)
@click.option("--strong-range", type=float, default=None)
@click.option("--eps", type=float, default=0.1, show_default=True)
@click.option("--p", "tx_prob", type=float, default=0.5, show_default=True)
@click.option("--cap", type=float, default=None, help="distance cap (default: strong range)")
@click.option("--trials", type=int, default=1 << 16, show_default=True, help="Monte Carlo fallback")
@click.option("--mc-seed", type=int, default=0, show_default=True)
def calibrate(topo_path, alpha, beta, noise, power, strong_range, eps, tx_prob, cap, trials, mc_seed):
    """Largest dependable-link threshold for every pair within a distance cap."""
    if (power is None) == (strong_range is None):
        raise click.ClickException("give exactly one of --power / --strong-range")
    if power is None:
        power = power_for_strong_range(strong_range, alpha, beta, noise, eps)
    try:
        params = SinrParams(alpha=alpha, beta=beta, noise=noise, power=power, eps=eps)
    except ValueError as err:
        raise click.ClickException(str(err))
    topo = load_topology_file(topo_path)
    if cap is None:
        cap = transmission_range(params).strong
    # mu is an output here; the bundle still needs a placeholder below p
    rel = ReliabilityParams(p=tx_prob, mu=tx_prob / 4.0, gamma=0.5)
    estimator = None
    if topo.n > DEFAULT_EXACT_CAP:
        members = list(topo.ids)

        def estimator(u, v):
            return mc_reliability(u, v, members, topo, params, rel, trials, mc_seed)

        click.echo(
            f"# {topo.n} nodes exceed the exact cap {DEFAULT_EXACT_CAP}; "
            f"Monte Carlo with {trials} trials per link",
            err=True,
        )
    try:
        mu_star = calibrate_mu(topo, params, rel, cap, estimator=estimator)
    except ValueError as err:
        raise click.ClickException(str(err))
    click.echo(f"mu_star = {mu_star:.9g} (cap {cap:.6g}, p {tx_prob:g}, n {topo.n})")


@main.command()
@click.option(
    "--run",
    "run_dir",
    type=click.Path(exists=True, file_okay=False),
    required=True,
    help="an output directory produced by `run`",
)
def report(run_dir):
    """Render figures for a finished experiment run, next to its metrics."""
    from .report import render_report

    try:
        written = render_report(run_dir)
    except (OSError, ValueError, KeyError) as err:
        raise click.ClickException(f"report failed: {err}")
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
