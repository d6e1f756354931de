"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 degenerate evidence, 4 numeric error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from bayesinv import config as config_mod
from bayesinv import harness
from bayesinv.errors import ConfigError, DegenerateEvidence, IoError, NumericError


def _load(source):
    if source in harness.RECIPES:
        return harness.load_recipe(source)
    return config_mod.load(Path(source).read_text())


def _guard(fn):
    try:
        return fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(harness.EXIT_CONFIG)
    except DegenerateEvidence as exc:
        click.echo(f"degenerate evidence: {exc}", err=True)
        sys.exit(harness.EXIT_DEGENERATE)
    except (NumericError, IoError) as exc:
        click.echo(f"numeric error: {exc}", err=True)
        sys.exit(harness.EXIT_NUMERIC)


@click.group()
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True,
              help="Output directory.")
@click.option("--threads", type=int, default=1, show_default=True, help="Worker threads for particle blocks.")
@click.pass_context
def main(ctx, seed, out, threads):
    """Particle posteriors and convergence ladders for Bayesian inverse problems."""
    ctx.obj = {"seed": seed, "out": Path(out), "threads": threads}


@main.command()
@click.argument("config")
@click.pass_obj
def generate(opts, config):
    """Write the prior ensemble and synthetic observation for CONFIG (file or recipe name)."""
    paths = _guard(lambda: harness.generate(_load(config), opts["out"], opts["seed"]))
    for p in paths:
        click.echo(str(p))


@main.command()
@click.argument("config")
@click.pass_obj
def posterior(opts, config):
    """Reference-level posterior weights and summary."""
    post = _guard(lambda: harness.posterior_only(_load(config), opts["out"], opts["threads"], opts["seed"]))
    click.echo(f"log_evidence={post.log_evidence:.6g} ess={post.ess:.6g} valid={post.valid}")
    if not post.valid:
        sys.exit(harness.EXIT_DEGENERATE)


@main.command()
@click.argument("config")
@click.pass_obj
def ladder(opts, config):
    """Full run: posteriors at every level plus the convergence report."""
    manifest = _guard(lambda: harness.run_experiment(_load(config), opts["out"], opts["threads"], opts["seed"]))
    click.echo(f"{manifest.name}: {manifest.status} ({len(manifest.files)} files in {opts['out']})")
    click.echo(" ".join(f"{k}={v:.3f}s" for k, v in manifest.timings.items()))
    sys.exit(manifest.exit_code)


@main.command()
@click.argument("config")
@click.pass_obj
def probe(opts, config):
    """Continuity probe of the posterior under perturbations of the observation."""
    rows, path = _guard(lambda: harness.run_probe(_load(config), opts["out"], opts["threads"], opts["seed"]))
    for r in rows:
        click.echo(f"dir={r.direction} scale={r.scale:g} modulus={r.modulus:.6g}{' DEGENERATE' if r.degenerate else ''}")
    click.echo(str(path))


@main.group()
def recipes():
    """Bundled example configurations."""


@recipes.command("list")
def recipes_list():
    for name in harness.RECIPES:
        click.echo(name)


@recipes.command("show")
@click.argument("name")
def recipes_show(name):
    click.echo(_guard(lambda: harness.recipe_text(name)), nl=False)


@recipes.command("run")
@click.argument("name")
@click.pass_obj
def recipes_run(opts, name):
    manifest = _guard(lambda: harness.run_experiment(harness.load_recipe(name), opts["out"] / name,
                                                     opts["threads"], opts["seed"]))
    click.echo(f"{name}: {manifest.status}")
    sys.exit(manifest.exit_code)


@main.command()
def schema():
    """Print the config JSON schema."""
    click.echo(config_mod.schema_json())


if __name__ == "__main__":
    main()
