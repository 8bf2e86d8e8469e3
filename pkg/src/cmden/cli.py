"""cmden Command Line Interface."""

import json
import logging
from pathlib import Path
from typing import Optional

import click
import yaml
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from cmden.errors import CMDENError

console = Console()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2
FAR_BIN_IMPROVEMENT = 0.2
DEPTH_SUFFIXES = (".pfm", ".png")


class ExitCodeGroup(click.Group):
    """Click group mapping usage and input errors to exit 1.

    Commands report acceptance or tolerance failures themselves with
    exit 2.
    """

    def make_context(self, *args, **kwargs) -> click.Context:
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise
        except (CMDENError, OSError, ValueError, yaml.YAMLError) as e:
            logger.debug("Command failed", exc_info=True)
            console.print(f"[red]Error:[/red] {e}")
            ctx.exit(EXIT_USAGE)


def setup_logging(verbose: bool = False) -> None:
    """Configure logging with rich handler."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(rich_tracebacks=True, console=console)],
    )


def _get_settings_from_context(ctx: click.Context):
    """Load settings honoring the CLI config path."""
    from cmden.config import get_settings

    config_path = ctx.obj.get("config_path") if ctx.obj else None
    return get_settings(config_file=config_path)


def _parse_edges(raw: str, param_hint: str) -> list[float]:
    """Parse ``"0,30,60,80"`` into strictly increasing edges."""
    try:
        edges = [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as e:
        raise click.BadParameter(f"not a comma-separated list of numbers: {raw}", param_hint=param_hint) from e
    if len(edges) < 2:
        raise click.BadParameter("at least two edges are required", param_hint=param_hint)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise click.BadParameter(f"edges must be strictly increasing, got {edges}", param_hint=param_hint)
    return edges


def _parse_size(raw: str) -> tuple[int, int]:
    """Parse ``"48x64"`` into ``(height, width)``."""
    parts = raw.lower().split("x")
    try:
        height, width = (int(p) for p in parts)
    except ValueError as e:
        raise click.BadParameter(f"expected HxW, got {raw}", param_hint="--size") from e
    if height < 8 or width < 8:
        raise click.BadParameter(f"size must be at least 8x8, got {raw}", param_hint="--size")
    return height, width


def _depth_files(directory: Path) -> dict[str, Path]:
    return {
        p.stem: p
        for p in sorted(directory.iterdir())
        if p.is_file() and p.suffix.lower() in DEPTH_SUFFIXES
    }


def _metrics_table(title: str, rows) -> Table:
    from cmden.evaluation import METRIC_COLUMNS
    from cmden.evaluation.tables import COLUMN_TITLES

    table = Table(title=title)
    table.add_column("Name", style="cyan")
    for column in METRIC_COLUMNS:
        table.add_column(COLUMN_TITLES[column], justify="right")
    for name, report in rows:
        table.add_row(name, *[f"{v:.4f}" for v in report.metrics()])
    return table


@click.group(cls=ExitCodeGroup)
@click.option("-v", "--verbose", is_flag=True, help="Enable verbose output")
@click.option(
    "--config",
    type=click.Path(exists=True, path_type=Path),
    help="Path to YAML or JSON config file",
)
@click.pass_context
def cli(ctx: click.Context, verbose: bool, config: Optional[Path]) -> None:
    """cmden - cascaded monocular depth estimation by direct optimization.

    Check gradients, run synthetic cascade experiments, build sight masks,
    fuse layers and evaluate depth maps.
    """
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config

    settings = _get_settings_from_context(ctx)
    ctx.obj["verbose"] = verbose or settings.verbose
    setup_logging(ctx.obj["verbose"])


@cli.command()
@click.option("--size", type=int, help="Side of the square test image")
@click.option("--probes", type=int, help="Probed coordinates per stage")
@click.option("--seed", type=int, help="Random seed")
@click.option("--epsilon", type=float, help="Central-difference step")
@click.option("--tolerance", type=float, help="Maximum relative error")
@click.option("--corrupt-stage", hidden=True, help="Scale one stage's analytic gradient")
@click.pass_context
def gradcheck(
    ctx: click.Context,
    size: Optional[int],
    probes: Optional[int],
    seed: Optional[int],
    epsilon: Optional[float],
    tolerance: Optional[float],
    corrupt_stage: Optional[str],
) -> None:
    """Compare every stage's analytic gradient with central differences."""
    from cmden.optimization import gradcheck_stages

    config = _get_settings_from_context(ctx).gradcheck
    tolerance = config.tolerance if tolerance is None else tolerance
    results = gradcheck_stages(
        size=config.size if size is None else size,
        probes=config.probes if probes is None else probes,
        seed=config.seed if seed is None else seed,
        epsilon=config.epsilon if epsilon is None else epsilon,
        tolerance=tolerance,
        corrupt_stage=corrupt_stage,
    )

    table = Table(title="Gradient Check")
    table.add_column("Stage", style="cyan")
    table.add_column("Worst rel. error", justify="right")
    table.add_column("Coordinate", justify="right")
    table.add_column("Checked", justify="right")
    table.add_column("Skipped", justify="right")
    table.add_column("Status")
    for r in results:
        status = "[green]PASS[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(
            r.stage,
            f"{r.worst_relative_error:.3e}",
            str(r.worst_coordinate),
            str(r.checked),
            str(r.skipped),
            status,
        )
    console.print(table)

    failed = [r.stage for r in results if not r.passed]
    if failed:
        console.print(f"[red]FAIL[/red]: {', '.join(failed)} above tolerance {tolerance:g}")
        ctx.exit(EXIT_FAILURE)
    console.print(f"[green]PASS[/green]: all {len(results)} stages within {tolerance:g}")


def _demo_intervals(bands: list[float], layers: int) -> list[float]:
    import numpy as np

    if layers == len(bands) - 1:
        return list(bands)
    return [float(e) for e in np.linspace(0.0, bands[-1], layers + 1)]


def _perturbed_poses(poses, target_index: int, seed: int, baseline: float):
    """Seeded noise on every non-target pose, used as the joint-pose starting point."""
    import numpy as np

    from cmden.geometry import exp6

    rng = np.random.default_rng([seed, 1])
    scale = np.array([1e-3] * 3 + [0.05 * baseline] * 3)
    return [
        pose if k == target_index else exp6(pose.params + rng.normal(size=6) * scale)
        for k, pose in enumerate(poses)
    ]


def _write_run(out: Path, name: str, result) -> None:
    from cmden.dataio import write_depth_preview, write_mask_pfm, write_pfm
    from cmden.optimization import write_trace_csv

    write_pfm(out / f"{name}_rough.pfm", result.rough_depth)
    write_depth_preview(out / f"{name}_rough.png", result.rough_depth)
    write_pfm(out / f"{name}_fused.pfm", result.fused_depth)
    write_depth_preview(out / f"{name}_fused.png", result.fused_depth)
    write_trace_csv(out / f"{name}_trace_rough.csv", result.report.rough.trace)
    for k, (mask, depth, layer) in enumerate(
        zip(result.masks, result.layer_depths, result.report.layers)
    ):
        write_pfm(out / f"{name}_layer_{k}.pfm", depth)
        write_mask_pfm(out / f"{name}_mask_{k}.pfm", mask.mask)
        write_trace_csv(out / f"{name}_trace_layer_{k}.csv", layer.trace)
    (out / f"{name}_report.json").write_text(json.dumps(result.report.to_dict(), indent=2))


def _acceptance_failures(baseline, cascade, baseline_bins, cascade_bins) -> list[str]:
    failures = []
    if not cascade.abs_rel < baseline.abs_rel:
        failures.append(
            f"fused Abs Rel {cascade.abs_rel:.4f} is not below baseline {baseline.abs_rel:.4f}"
        )
    far_base, far_cascade = baseline_bins.bins[-1], cascade_bins.bins[-1]
    if far_base.count and far_base.abs_rel:
        improvement = 1.0 - far_cascade.abs_rel / far_base.abs_rel
        if improvement < FAR_BIN_IMPROVEMENT:
            failures.append(
                f"far bin [{far_base.lower:g}, {far_base.upper:g}] Abs Rel improved by "
                f"{improvement:.1%}, expected at least {FAR_BIN_IMPROVEMENT:.0%}"
            )
    return failures


@cli.command("cascade-demo")
@click.option("--layers", type=int, help="Cascade layers (1 runs the baseline only)")
@click.option("--xi", type=int, help="Frame-interval base")
@click.option("--size", help="Image size as HxW")
@click.option("--seed", type=int, help="Texture and noise seed")
@click.option("--frames", type=int, help="Frames in the synthetic sequence")
@click.option("--iterations", type=int, help="Optimizer iterations per stage")
@click.option("--threads", type=int, help="Worker threads for cascade layers")
@click.option("--joint-pose", is_flag=True, help="Optimize poses from a perturbed start")
@click.option("--out", "-o", type=click.Path(path_type=Path), help="Output directory")
@click.pass_context
def cascade_demo(
    ctx: click.Context,
    layers: Optional[int],
    xi: Optional[int],
    size: Optional[str],
    seed: Optional[int],
    frames: Optional[int],
    iterations: Optional[int],
    threads: Optional[int],
    joint_pose: bool,
    out: Optional[Path],
) -> None:
    """Run the single-layer baseline and the cascade on a three-band scene."""
    from cmden.cascade import CascadeConfig, plan_frame_offsets, run_cascade
    from cmden.evaluation import binned_accuracy, evaluate, write_binned_csv, write_reports_csv
    from cmden.synthscene import make_three_band_scene, render_frame

    settings = _get_settings_from_context(ctx)
    demo = settings.demo
    layers = demo.layers if layers is None else layers
    xi = demo.xi if xi is None else xi
    if layers < 1:
        raise click.BadParameter(f"must be >= 1, got {layers}", param_hint="--layers")
    if xi < 1:
        raise click.BadParameter(f"must be >= 1, got {xi}", param_hint="--xi")
    height, width = _parse_size(size) if size else (demo.height, demo.width)
    seed = demo.seed if seed is None else seed
    frames = demo.frames if frames is None else frames
    iterations = demo.iterations if iterations is None else iterations
    threads = settings.threads if threads is None else threads
    out = out or settings.get_output_dir()
    out.mkdir(parents=True, exist_ok=True)

    bands = list(demo.bands)
    scene = make_three_band_scene(
        intervals=list(zip(bands, bands[1:])),
        size=(height, width),
        frames=frames,
        baseline=demo.baseline,
        seed=seed,
        noise_std=demo.noise_std,
        min_depth=demo.min_depth,
        max_depth=demo.max_depth,
    )
    target = frames // 2
    rendered = [render_frame(scene, k) for k in range(frames)]
    images = [f.image for f in rendered]
    gt = rendered[target].depth
    poses = [scene.camera_pose(k) for k in range(frames)]
    if joint_pose:
        poses = _perturbed_poses(poses, target, seed, demo.baseline)

    edges = _demo_intervals(bands, layers)
    console.print(f"[bold]Three-band scene[/bold] {height}x{width}, {frames} frames, target {target}")
    console.print(f"Intervals {edges}, frame offsets {plan_frame_offsets(xi, layers)}")

    common = dict(
        scales=demo.scales,
        optimizer=settings.optimizer.model_copy(update={"max_iterations": iterations}),
        min_depth=demo.min_depth,
        max_depth=demo.max_depth,
        freeze_pose=not joint_pose,
        target_index=target,
    )
    configs = {"baseline": CascadeConfig.from_intervals([0.0, bands[-1]], xi=xi, **common)}
    if layers > 1:
        configs["cascade"] = CascadeConfig.from_intervals(edges, xi=xi, **common)

    scene.save(out / "scene.json")
    (out / "config.json").write_text(
        json.dumps({name: json.loads(c.to_json()) for name, c in configs.items()}, indent=2)
    )
    from cmden.dataio import write_depth_preview, write_pfm

    write_pfm(out / "gt_depth.pfm", gt)
    write_depth_preview(out / "gt_depth.png", gt)

    cap = settings.evaluation.cap
    median_scale = joint_pose
    reports, binned = [], {}
    for name, config in configs.items():
        console.print(f"Running {name} ({len(config.layers)} layer(s))...")
        result = run_cascade(images, scene.intrinsics, config, poses=poses, threads=threads)
        _write_run(out, name, result)
        reports.append((name, evaluate(result.fused_depth, gt, cap=cap, median_scale=median_scale)))
        binned[name] = binned_accuracy(
            result.fused_depth, gt, bands, cap=cap, median_scale=median_scale
        )
        for warning in result.report.warnings:
            console.print(f"[yellow]Warning:[/yellow] {warning}")

    write_reports_csv(out / "metrics.csv", reports)
    write_binned_csv(out / "binned.csv", binned)
    console.print(_metrics_table("Fused depth vs ground truth", reports))

    bin_table = Table(title="Abs Rel by ground-truth depth")
    bin_table.add_column("Bin", style="cyan")
    bin_table.add_column("Pixels", justify="right")
    for name in binned:
        bin_table.add_column(name, justify="right")
    for k, b in enumerate(binned["baseline"].bins):
        cells = []
        for name in binned:
            value = binned[name].bins[k].abs_rel
            cells.append("-" if value is None else f"{value:.4f}")
        bin_table.add_row(f"[{b.lower:g}, {b.upper:g}]", str(b.count), *cells)
    console.print(bin_table)
    console.print(f"Artifacts written to {out}")

    if "cascade" in configs:
        failures = _acceptance_failures(
            reports[0][1], reports[1][1], binned["baseline"], binned["cascade"]
        )
        for failure in failures:
            console.print(f"[red]FAIL[/red]: {failure}")
        if failures:
            ctx.exit(EXIT_FAILURE)


@cli.command("eval")
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--cap", type=float, help="Depth cap in meters")
@click.option("--median-scale/--no-median-scale", default=None, help="Median-scale predictions")
@click.option("--bins", help="Ground-truth depth bin edges, e.g. 0,30,60,80")
@click.option("--out", "-o", type=click.Path(path_type=Path), help="Directory for CSV output")
@click.pass_context
def eval_command(
    ctx: click.Context,
    pred_dir: Path,
    gt_dir: Path,
    cap: Optional[float],
    median_scale: Optional[bool],
    bins: Optional[str],
    out: Optional[Path],
) -> None:
    """Evaluate predicted depth maps against ground truth, paired by file name."""
    from cmden.dataio import read_depth_map
    from cmden.evaluation import (
        aggregate_reports,
        binned_accuracy,
        evaluate,
        write_binned_csv,
        write_reports_csv,
    )

    config = _get_settings_from_context(ctx).evaluation
    cap = config.cap if cap is None else cap
    median_scale = config.median_scale if median_scale is None else median_scale
    edges = _parse_edges(bins, "--bins") if bins else None

    preds, gts = _depth_files(pred_dir), _depth_files(gt_dir)
    missing = sorted(set(preds) ^ set(gts))
    if missing:
        for name in missing:
            where = "ground truth" if name in preds else "prediction"
            console.print(f"[red]Missing {where}[/red] for {name}")
        ctx.exit(EXIT_FAILURE)
    if not preds:
        raise click.UsageError(f"no depth maps found in {pred_dir}")

    rows, binned = [], {}
    for name in sorted(preds):
        pred, _ = read_depth_map(preds[name])
        gt, valid = read_depth_map(gts[name])
        rows.append((name, evaluate(pred, gt, valid, cap=cap, median_scale=median_scale)))
        if edges:
            binned[name] = binned_accuracy(pred, gt, edges, valid, cap=cap, median_scale=median_scale)
    rows.append(("mean", aggregate_reports([r for _, r in rows])))
    console.print(_metrics_table(f"Evaluation ({len(preds)} frames, cap {cap:g} m)", rows))

    if out:
        write_reports_csv(out / "metrics.csv", rows)
        if binned:
            write_binned_csv(out / "binned.csv", binned)
        console.print(f"CSV written to {out}")


@cli.command()
@click.option("--rough", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--intervals", required=True, help="Interval edges, e.g. 0,30,60,80")
@click.option("--relative", is_flag=True, help="Edges are fractions of the maximum rough depth")
@click.option("--out", "-o", required=True, type=click.Path(path_type=Path))
def mask(rough: Path, intervals: str, relative: bool, out: Path) -> None:
    """Split a rough depth map into sight-distance masks."""
    from cmden.cascade import generate_sight_masks, resolve_intervals
    from cmden.dataio import read_depth_map, write_mask_pfm

    edges = _parse_edges(intervals, "--intervals")
    depth, _ = read_depth_map(rough)
    pairs = list(zip(edges, edges[1:]))
    if relative:
        pairs = resolve_intervals(pairs, depth)
    masks = generate_sight_masks(depth, pairs)

    table = Table(title="Sight masks")
    table.add_column("Mask", style="cyan")
    table.add_column("Interval")
    table.add_column("Pixels", justify="right")
    table.add_column("Coverage", justify="right")
    for k, m in enumerate(masks):
        path = write_mask_pfm(out / f"mask_{k:02d}.pfm", m.mask)
        table.add_row(path.name, f"[{m.alpha:g}, {m.beta:g})", str(int(m.mask.sum())), f"{m.coverage:.4f}")
    console.print(table)


@cli.command()
@click.option("--masks", "masks_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--depths", "depths_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.pass_context
def fuse(ctx: click.Context, masks_dir: Path, depths_dir: Path, out: Path) -> None:
    """Fuse per-layer depth maps with their sight masks.

    Masks (``mask_*.pfm``) and depths (``*.pfm``) are paired in name order.
    """
    import numpy as np

    from cmden.cascade import SightMask, fuse_depth
    from cmden.dataio import read_depth_map, read_mask_pfm, write_pfm

    mask_paths = sorted(masks_dir.glob("mask_*.pfm"))
    mask_set = {p.resolve() for p in mask_paths}
    depth_paths = sorted(p for p in depths_dir.glob("*.pfm") if p.resolve() not in mask_set)
    if not mask_paths:
        raise click.UsageError(f"no mask_*.pfm files in {masks_dir}")
    if len(mask_paths) != len(depth_paths):
        raise click.UsageError(f"{len(mask_paths)} masks but {len(depth_paths)} depth maps")

    masks = [
        SightMask(mask=read_mask_pfm(p), alpha=float(k), beta=float(k + 1))
        for k, p in enumerate(mask_paths)
    ]
    counts = np.sum([m.mask.astype(np.int64) for m in masks], axis=0)
    overlap = int((counts > 1).sum())
    if overlap:
        console.print(f"[red]FAIL[/red]: masks overlap at {overlap} pixels")
        ctx.exit(EXIT_FAILURE)

    fused = fuse_depth(masks, [read_depth_map(p)[0] for p in depth_paths])
    write_pfm(out, fused)
    console.print(f"Fused {len(masks)} layers into {out}")


@cli.command()
@click.option("--scene", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "-o", required=True, type=click.Path(path_type=Path))
def render(scene: Path, out: Path) -> None:
    """Render every frame of a scene JSON file."""
    from cmden.dataio import export_frames
    from cmden.synthscene import SceneSpec

    manifest = export_frames(SceneSpec.load(scene), out)
    table = Table(title="Rendered frames")
    table.add_column("Frame", style="cyan")
    table.add_column("Image")
    table.add_column("Depth")
    table.add_column("Preview")
    for f in manifest.frames:
        table.add_row(str(f.index), f.image.name, f.depth.name, f.preview.name)
    console.print(table)


@cli.command()
def version() -> None:
    """Show version information."""
    from cmden import __version__

    console.print(f"cmden version {__version__}")


def main() -> None:
    """Main entry point."""
    cli(obj={})


if __name__ == "__main__":
    main()
