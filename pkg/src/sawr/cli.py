"""Command line interface: generate / train / solve / evaluate / report.

Every subcommand accepts ``--config FILE`` pointing at a versioned JSON
document; values there fill in options the user did not pass explicitly
(explicit flags win). Example::

    {"version": 1, "evaluate": {"methods": "sa,sawr", "beta_max": 5.0}}
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import agent, figures, gnn, harness, hybrid
from .annealing import (DEFAULT_BETA_MAX, DEFAULT_BETA_MIN, DEFAULT_BETA_STEPS,
                        DEFAULT_SWEEPS, geometric_schedule, simulated_annealing)
from .harness import (DESK_COUNT, DESK_SIZES, PAPER_SCALE_COUNT,
                      PAPER_SCALE_SIZES, EvalConfig, ProxyConfig)
from .ising import (energy, read_configuration, read_instance,
                    random_configuration, write_configuration)

CONFIG_VERSION = 1


def _apply_config(ctx: click.Context, config_path: str | None, section: str) -> None:
    """Fill defaulted options from a JSON config file (explicit flags win)."""
    if not config_path:
        return
    with open(config_path) as fh:
        doc = json.load(fh)
    if doc.get("version") != CONFIG_VERSION:
        raise click.UsageError(f"{config_path}: expected config version {CONFIG_VERSION}")
    for name, value in doc.get(section, {}).items():
        if name not in ctx.params:
            raise click.UsageError(f"{config_path}: unknown {section} option {name!r}")
        if ctx.get_parameter_source(name) == click.core.ParameterSource.DEFAULT:
            ctx.params[name] = value


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise click.UsageError(f"bad size list {text!r}")
    if not sizes or any(n < 1 for n in sizes):
        raise click.UsageError(f"sizes must be positive integers, got {text!r}")
    return sizes


@click.group()
@click.version_option()
def main():
    """Spin-glass post-correction toolkit for Chimera annealer outputs."""


@main.command()
@click.option("--out", "outdir", required=True, type=click.Path(file_okay=False))
@click.option("--sizes", default=",".join(map(str, DESK_SIZES)), show_default=True,
              help="Comma-separated Chimera grid sides.")
@click.option("--count", default=DESK_COUNT, show_default=True,
              help="Instances per size.")
@click.option("--seed", default=0, show_default=True)
@click.option("--paper-scale", is_flag=True,
              help=f"Use sizes {PAPER_SCALE_SIZES} with {PAPER_SCALE_COUNT} "
                   "instances each (slow).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def generate(ctx, outdir, sizes, count, seed, paper_scale, config_path):
    """Write a benchmark of random instances plus uniform starts."""
    _apply_config(ctx, config_path, "generate")
    sizes, count, seed = ctx.params["sizes"], ctx.params["count"], ctx.params["seed"]
    if ctx.params["paper_scale"]:
        size_list, count = list(PAPER_SCALE_SIZES), PAPER_SCALE_COUNT
    else:
        size_list = _parse_sizes(sizes)
    specs = harness.generate_benchmark(ctx.params["outdir"], size_list, count, seed)
    click.echo(f"wrote {len(specs)} instances to {ctx.params['outdir']}")


@main.command()
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(dir_okay=False), help="Output parameter file.")
@click.option("--log", "log_path", type=click.Path(dir_okay=False),
              help="Training log CSV (episode, epsilon, mean loss, best energy).")
@click.option("--size", default=agent.DEFAULT_TRAIN_SIZE, show_default=True)
@click.option("--episodes", default=2000, show_default=True)
@click.option("--embed-dim", default=gnn.DEFAULT_EMBED_DIM, show_default=True)
@click.option("--layers", default=gnn.DEFAULT_LAYERS, show_default=True)
@click.option("--n-step", default=agent.DEFAULT_N_STEP, show_default=True)
@click.option("--gamma", default=agent.DEFAULT_GAMMA, show_default=True)
@click.option("--epsilon-start", default=1.0, show_default=True)
@click.option("--epsilon-end", default=0.05, show_default=True)
@click.option("--epsilon-fraction", default=0.5, show_default=True)
@click.option("--buffer-capacity", default=agent.DEFAULT_BUFFER_CAPACITY, show_default=True)
@click.option("--batch-size", default=agent.DEFAULT_BATCH_SIZE, show_default=True)
@click.option("--target-sync", default=agent.DEFAULT_TARGET_SYNC, show_default=True)
@click.option("--learning-rate", default=agent.DEFAULT_LEARNING_RATE, show_default=True)
@click.option("--updates-per-episode", default=1, show_default=True)
@click.option("--sa-preprocess-prob", default=agent.DEFAULT_SA_PREPROCESS_PROB,
              show_default=True)
@click.option("--beta-min", default=DEFAULT_BETA_MIN, show_default=True)
@click.option("--beta-max", default=DEFAULT_BETA_MAX, show_default=True)
@click.option("--beta-steps", default=DEFAULT_BETA_STEPS, show_default=True)
@click.option("--sweeps", default=DEFAULT_SWEEPS, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--quiet", is_flag=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def train(ctx, **_kwargs):
    """Train the flip policy on random instances of one Chimera size."""
    _apply_config(ctx, ctx.params["config_path"], "train")
    p = ctx.params
    cfg = agent.TrainConfig(
        size=p["size"], episodes=p["episodes"], embed_dim=p["embed_dim"],
        layers=p["layers"], n_step=p["n_step"], gamma=p["gamma"],
        epsilon_start=p["epsilon_start"], epsilon_end=p["epsilon_end"],
        epsilon_fraction=p["epsilon_fraction"],
        buffer_capacity=p["buffer_capacity"], batch_size=p["batch_size"],
        target_sync=p["target_sync"], learning_rate=p["learning_rate"],
        updates_per_episode=p["updates_per_episode"],
        sa_preprocess_prob=p["sa_preprocess_prob"],
        sa_beta_min=p["beta_min"], sa_beta_max=p["beta_max"],
        sa_beta_steps=p["beta_steps"], sa_sweeps=p["sweeps"], seed=p["seed"])

    def progress(row):
        if not p["quiet"] and (row["episode"] + 1) % 50 == 0:
            click.echo(f"episode {row['episode'] + 1}/{cfg.episodes} "
                       f"eps={row['epsilon']:.3f} best={row['best_energy']:.4f}")

    result = agent.train(cfg, progress=progress)
    gnn.save_checkpoint(result.params, p["checkpoint_path"])
    click.echo(f"checkpoint written to {p['checkpoint_path']}")
    if p["log_path"]:
        agent.write_train_log(result.log, p["log_path"])
        click.echo(f"training log written to {p['log_path']}")


@main.command()
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["sa", "model", "sawr"]), required=True)
@click.option("--start", "start_path", type=click.Path(exists=True, dir_okay=False),
              help="Start configuration; defaults to a seeded uniform one.")
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, dir_okay=False),
              help="Trained parameters (required for model and sawr).")
@click.option("--beta-min", default=DEFAULT_BETA_MIN, show_default=True)
@click.option("--beta-max", default=DEFAULT_BETA_MAX, show_default=True)
@click.option("--beta-steps", default=DEFAULT_BETA_STEPS, show_default=True)
@click.option("--sweeps", default=DEFAULT_SWEEPS, show_default=True)
@click.option("--beta-switch", type=float, default=None,
              help="SAwR switch point [default: 0.8 * beta-max].")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Write the best configuration here (sigma format).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def solve(ctx, **_kwargs):
    """Improve one instance's start state with a chosen method."""
    _apply_config(ctx, ctx.params["config_path"], "solve")
    p = ctx.params
    inst = read_instance(p["instance"])
    if p["start_path"]:
        start = read_configuration(p["start_path"])
        if len(start) != inst.topo.num_nodes:
            raise click.UsageError(
                f"start has {len(start)} spins, instance has {inst.topo.num_nodes}")
    else:
        start = random_configuration(inst.topo, np.random.SeedSequence([p["seed"], 1]))
    params = None
    if p["method"] in ("model", "sawr"):
        if not p["checkpoint_path"]:
            raise click.UsageError(f"--method {p['method']} requires --checkpoint")
        params = gnn.load_checkpoint(p["checkpoint_path"])
    sched = geometric_schedule(p["beta_min"], p["beta_max"], p["beta_steps"], p["sweeps"])

    start_energy = energy(inst, start)
    if p["method"] == "sa":
        res = simulated_annealing(inst, start, sched, p["seed"])
        best, best_energy = res.best_config, res.best_energy
    elif p["method"] == "model":
        trace = agent.episode(inst, start, params)
        best, best_energy = trace.best_config, trace.best_energy
    else:
        switch = p["beta_switch"]
        if switch is None:
            switch = hybrid.default_beta_switch(sched)
        res = hybrid.sawr(inst, start, hybrid.SawrConfig(sched, switch, params, p["seed"]))
        best, best_energy = res.best_config, res.best_energy

    click.echo(f"start_energy {start_energy!r}")
    click.echo(f"best_energy {best_energy!r}")
    click.echo(f"improvement {start_energy - best_energy!r}")
    if p["out_path"]:
        write_configuration(best, p["out_path"])
        click.echo(f"configuration written to {p['out_path']}")


@main.command()
@click.option("--instances", "instances_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "outdir", required=True, type=click.Path(file_okay=False))
@click.option("--methods", default="sa,model,sawr", show_default=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=0, show_default=True)
@click.option("--beta-min", default=DEFAULT_BETA_MIN, show_default=True)
@click.option("--beta-max", default=DEFAULT_BETA_MAX, show_default=True)
@click.option("--beta-steps", default=DEFAULT_BETA_STEPS, show_default=True)
@click.option("--sweeps", default=DEFAULT_SWEEPS, show_default=True)
@click.option("--beta-switch", type=float, default=None)
@click.option("--proxy-beta-min", default=0.1, show_default=True)
@click.option("--proxy-beta-max", default=1.0, show_default=True)
@click.option("--proxy-steps", default=10, show_default=True)
@click.option("--proxy-sweeps", default=1, show_default=True)
@click.option("--starts", "starts_dir", type=click.Path(exists=True, file_okay=False),
              help="External start configurations (e.g. real annealer samples) "
                   "named like the instances; disables the proxy.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def evaluate(ctx, **_kwargs):
    """Compare methods over a benchmark; writes report.json to --out."""
    _apply_config(ctx, ctx.params["config_path"], "evaluate")
    p = ctx.params
    methods = tuple(m.strip() for m in p["methods"].split(",") if m.strip())
    params = None
    if {"model", "sawr"} & set(methods):
        if not p["checkpoint_path"]:
            raise click.UsageError("model/sawr methods require --checkpoint")
        params = gnn.load_checkpoint(p["checkpoint_path"])
    cfg = EvalConfig(
        methods=methods, beta_min=p["beta_min"], beta_max=p["beta_max"],
        beta_steps=p["beta_steps"], sweeps=p["sweeps"], beta_switch=p["beta_switch"],
        proxy=ProxyConfig(p["proxy_beta_min"], p["proxy_beta_max"],
                          p["proxy_steps"], p["proxy_sweeps"]),
        starts_dir=p["starts_dir"], params=params)
    trials = harness.load_benchmark(p["instances_dir"])
    report = harness.evaluate(trials, cfg, p["seed"])
    os.makedirs(p["outdir"], exist_ok=True)
    report_path = os.path.join(p["outdir"], "report.json")
    harness.report_to_json(report, report_path)
    click.echo(f"evaluated {len(trials)} trials x {len(methods)} methods")
    click.echo(f"report written to {report_path}")


@main.command()
@click.argument("report_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "outdir", required=True, type=click.Path(file_okay=False))
@click.option("--formats", default="csv,plotdata", show_default=True)
@click.option("--figures/--no-figures", "render_figures", default=True,
              show_default=True, help="Also render PNG figures per metric.")
def report(report_json, outdir, formats, render_figures):
    """Emit summary CSV, plot data, and figures from an evaluation report."""
    rep = harness.report_from_json(report_json)
    fmt = tuple(f.strip() for f in formats.split(",") if f.strip())
    unknown = set(fmt) - {"csv", "plotdata"}
    if unknown:
        raise click.UsageError(f"unknown formats: {sorted(unknown)}")
    paths = harness.emit_report(rep, outdir, fmt)
    if render_figures:
        for path in figures.render_report_figures(rep, outdir):
            paths[os.path.basename(path)] = path
    for label, path in paths.items():
        click.echo(f"{label}: {path}")


if __name__ == "__main__":
    sys.exit(main())
