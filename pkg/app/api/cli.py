from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click

from app.models.cli_requests import read_flow_params
from app.models.cli_responses import RunPayload
from app.orchestrator.experiment_orchestrator import ExperimentOrchestrator, dumps
from app.presets.preset_registry import PresetRegistry

logger = logging.getLogger(__name__)

VARIANTS = click.Choice(["standard", "odd", "dual", "dual_odd"])


def _params(ctx: click.Context, **options: Any) -> Dict[str, Any]:
    """Subcommand options plus the group's --seed / --output-dir, unset ones left to the model defaults."""
    merged = {key: value for key, value in ctx.obj.items() if value is not None}
    merged.update({key: value for key, value in options.items() if value is not None})
    return merged


def _emit(ctx: click.Context, payload: Dict[str, Any]) -> None:
    click.echo(dumps(payload))
    if payload["status"] != "success":
        ctx.exit(1)


def _execute(ctx: click.Context, command: str, params: Dict[str, Any]) -> None:
    _emit(ctx, ExperimentOrchestrator().run(command, params))


@click.group()
@click.option("--seed", type=int, default=None, help="Seed for every randomized step.")
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.pass_context
def cli(ctx: click.Context, seed: Optional[int], output_dir: Optional[Path]) -> None:
    """Lawson surfaces in S^3: symmetry groups, Plateau disks, Willmore energy and orbifold patterns."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, output_dir=output_dir)


@cli.command()
@click.option("--m", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.pass_context
def groups(ctx: click.Context, m: int, k: int) -> None:
    """Group orders, the inclusion lattice and the quotients by R."""
    _execute(ctx, "groups", _params(ctx, m=m, k=k))


@cli.command()
@click.option("--m", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--samples", type=int, default=None)
@click.pass_context
def tiling(ctx: click.Context, m: int, k: int, samples: Optional[int]) -> None:
    """Sampled tile cover and fundamental domain checks."""
    _execute(ctx, "tiling", _params(ctx, m=m, k=k, samples=samples))


@cli.command()
@click.option("--m", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--j", type=int, default=0, show_default=True)
@click.option("--l", "l_", type=int, default=0, show_default=True)
@click.option("--n", type=int, default=None)
@click.option("--tol", type=float, default=None)
@click.option("--max-iters", type=int, default=None)
@click.option("--metric", type=click.Choice(["h1", "l2"]), default=None)
@click.option("--dual", is_flag=True, default=False)
@click.pass_context
def plateau(ctx, m, k, j, l_, n, tol, max_iters, metric, dual) -> None:
    """Least-area disk over one geodesic quadrilateral."""
    _execute(
        ctx,
        "plateau",
        _params(ctx, m=m, k=k, j=j, l=l_, n=n, tol=tol, max_iters=max_iters, metric=metric, dual=dual),
    )


def _lawson_options(fn):
    for option in reversed(
        [
            click.option("--m", type=int, required=True),
            click.option("--k", type=int, required=True),
            click.option("--n", type=int, default=None),
            click.option("--variant", type=VARIANTS, default=None),
            click.option("--tol", type=float, default=None),
            click.option("--max-iters", type=int, default=None),
            click.option("--ladder", type=int, multiple=True, help="Resolutions for extrapolation, e.g. --ladder 8 --ladder 16."),
        ]
    ):
        fn = option(fn)
    return fn


@cli.command("build-lawson")
@_lawson_options
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--report", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
def build_lawson(ctx, m, k, n, variant, tol, max_iters, ladder, out, report) -> None:
    """Assemble xi_{m,k} (or a variant), verify it and write mesh and report."""
    _execute(
        ctx,
        "build-lawson",
        _params(
            ctx, m=m, k=k, n=n, variant=variant, tol=tol, max_iters=max_iters,
            ladder=list(ladder) or None, out=out, report=report,
        ),
    )


@cli.command()
@_lawson_options
@click.option("--pole", type=float, nargs=4, default=None, help="Projection pole in R^4.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.pass_context
def export(ctx, m, k, n, variant, tol, max_iters, ladder, pole, out_dir) -> None:
    """Stereographic OFF / OBJ plus the 4D CSV of a built surface."""
    _execute(
        ctx,
        "export",
        _params(
            ctx, m=m, k=k, n=n, variant=variant, tol=tol, max_iters=max_iters,
            ladder=list(ladder) or None, pole=list(pole) if pole else None, out_dir=out_dir,
        ),
    )


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--preset", default=None, help="Preset id from the preset registry.")
@click.option("--preset-version", default="v1", show_default=True)
@click.pass_context
def flow(ctx, config_path: Optional[Path], preset: Optional[str], preset_version: str) -> None:
    """Symmetric Willmore descent, or the neck probe for source = neck_probe."""
    if (config_path is None) == (preset is None):
        raise click.UsageError("give exactly one of --config or --preset")
    try:
        if config_path is not None:
            params = read_flow_params(config_path)
        else:
            params = PresetRegistry.flow_config(preset, preset_version)
    except (ValueError, KeyError, OSError) as e:
        logger.exception("Flow config could not be read")
        payload = RunPayload(
            run_id="flow-config",
            status="failure",
            stage="config",
            summary="flow config could not be read",
            issues=[{"error": type(e).__name__, "message": str(e)}],
        ).model_dump()
        _emit(ctx, payload)
        return
    _execute(ctx, "flow", {**params, **_params(ctx)})


@cli.group()
def orbifold() -> None:
    """Quotient patterns in S^3/R_{m,k}."""


@orbifold.command()
@click.option("--m", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--g", type=int, required=True)
@click.pass_context
def classify(ctx, m: int, k: int, g: int) -> None:
    """All (g_hat, v1, v2) compatible with genus g."""
    _execute(ctx, "orbifold", _params(ctx, action="classify", m=m, k=k, g=g))


@orbifold.command()
@click.option("--max-m", type=int, default=None)
@click.option("--max-k", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["markdown", "csv"]), default=None)
@click.pass_context
def table(ctx, max_m: Optional[int], max_k: Optional[int], fmt: Optional[str]) -> None:
    """Feasible patterns for every m >= k up to the limits."""
    _execute(ctx, "orbifold", _params(ctx, action="table", max_m=max_m, max_k=max_k, format=fmt))


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    args: Optional[List[str]] = list(argv) if argv is not None else None
    try:
        rv = cli.main(args=args, prog_name="lawson", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        return 1
    return rv if isinstance(rv, int) else 0
