"""Command-line interface for deep Chan-Vese segmentation.

Commands:
    segment        Foreground/background segmentation of one image
    segment-multi  N-region segmentation of one image
    train          Dataset-based training of a segmentation network
    infer          Apply a trained segmentation network to a directory of images
    eval           Score predicted masks against ground-truth masks
    plot-trace     Render an energy trace CSV as a static plot
    noise-sweep    Compare the deep model with the classical baselines across noise levels

Configuration precedence: built-in defaults < ``--config FILE`` < explicit flags < ``SEED``.
Exit codes: 0 success, 1 per-item failures (infer/eval), 2 invalid input, 3 numerical abort.
"""

from __future__ import annotations

import functools
import sys
from collections.abc import Callable, Iterator, Mapping
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import click
from click.core import ParameterSource
from loguru import logger
from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    TextColumn,
    TimeElapsedColumn,
)
from rich.table import Table

from .config import DeepCVConfig
from .exceptions import DeepCVError, ImageIOError, InvalidInputError, NumericalAbortError
from .imagecore import (
    DatasetLayout,
    LabelMask,
    center_crop_resize,
    center_crop_resize_mask,
    load_image,
    load_mask,
    make_synthetic,
    save_mask,
)
from .metrics import binary_scores, score_masks, summarize
from .models import (
    DatasetTrainerConfig,
    GaussianPrior,
    Hyperparams,
    IterationEvent,
    OnIterationCallback,
    SolverConfig,
)
from .report_models import (
    EpochRecord,
    EvalSummary,
    ImageScores,
    OperationResult,
    SolveReport,
)
from .run_config import (
    FlatConfig,
    FlatValue,
    RunConfig,
    from_flat,
    load_flat,
    save_run_config,
    to_flat,
)
from .run_pref import RunPref, apply_reproducibility
from .solvers import (
    infer_dataset,
    load_segmenter,
    solve_cv_baseline,
    solve_gaussian_region_baseline,
    solve_multiphase,
    solve_single,
    train_dataset,
)
from .solvers.dataset import BEST_CHECKPOINT, OnEpochCallback, match_channels
from .traces import plot_trace, read_trace_csv, write_json, write_rows, write_trace_csv

console = Console()
err_console = Console(stderr=True)

EXIT_FAILURES = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

SCORE_COLUMNS = ("image", "acc", "f", "miou", "precision", "recall", "flags")
EPOCH_COLUMNS = ("epoch", "energy", "aug_bce", "disc_bce", "cri", "val_acc", "val_miou")
SWEEP_COLUMNS = ("sigma", "method", "miou", "f", "acc")


@dataclass
class CliState:
    """Options of the command group shared with every subcommand."""

    quiet: bool = False


# ============================================================================
# Logging and error mapping
# ============================================================================


def configure_logging(verbose: bool, quiet: bool) -> None:
    """Route loguru to stderr at DEBUG (verbose), WARNING (quiet) or INFO."""
    logger.remove()
    level = "DEBUG" if verbose else "WARNING" if quiet else "INFO"
    _ = logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}",
    )


def exit_codes[**P](func: Callable[P, int]) -> Callable[P, None]:
    """Map library errors to exit codes; a nonzero return value also becomes the exit code."""

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> None:
        try:
            code = func(*args, **kwargs)
        except NumericalAbortError as e:
            logger.error(f"Numerical abort at iteration {e.iteration}: {e.diagnostics}")
            err_console.print(f"[red]Numerical abort:[/red] {e}")
            sys.exit(EXIT_NUMERICAL)
        except (ValueError, ImageIOError) as e:
            # InvalidInputError and pydantic's ValidationError are both ValueErrors
            err_console.print(f"[red]Error:[/red] {e}")
            sys.exit(EXIT_INVALID)
        if code:
            sys.exit(code)

    return wrapper


# ============================================================================
# Configuration resolution
# ============================================================================


def _given(ctx: click.Context, name: str) -> bool:
    return ctx.get_parameter_source(name) is ParameterSource.COMMANDLINE


def _flat_value(value: object) -> FlatValue:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, str | int | float | bool):
        return value
    if isinstance(value, list | tuple):
        return list(value)  # pyright: ignore[reportUnknownArgumentType]
    return str(value)


def explicit_overrides(ctx: click.Context, keys: Mapping[str, str]) -> FlatConfig:
    """Flat config entries for the flags given on the command line.

    Args:
        ctx: Click context of the running command
        keys: Parameter name -> dotted config key
    """
    return {
        key: _flat_value(ctx.params[name])
        for name, key in keys.items()
        if _given(ctx, name) and ctx.params[name] is not None
    }


def _list_prefix(key: str) -> str | None:
    parts = key.split(".")
    for index, part in enumerate(parts):
        if part.isdigit():
            return ".".join(parts[:index]) + "."
    return None


def merge_flat(flat: FlatConfig, update: Mapping[str, FlatValue]) -> None:
    """Overlay ``update`` on ``flat``; a list of objects in ``update`` replaces the whole list."""
    for prefix in {p for p in map(_list_prefix, update) if p is not None}:
        for key in [k for k in flat if k.startswith(prefix)]:
            del flat[key]
    flat.update(update)


def resolve_config(
    base: RunConfig, config_file: Path | None, overrides: Mapping[str, FlatValue]
) -> RunConfig:
    """Apply the precedence defaults < config file < explicit flags < SEED env var.

    Raises:
        InvalidInputError: If the config file belongs to another command or is not valid TOML
        pydantic.ValidationError: If a merged value is out of range
    """
    flat = to_flat(base)
    if config_file is not None:
        loaded = load_flat(config_file)
        command = loaded.get("command")
        if command is not None and command != base.command:
            raise InvalidInputError(
                f"{config_file} was saved by {command!r}, not {base.command!r}"
            )
        merge_flat(flat, loaded)
        logger.debug(f"Loaded {len(loaded)} settings from {config_file}")
    merge_flat(flat, overrides)
    config = from_flat(flat)

    pref = RunPref.from_env()
    seed = pref.resolve_seed(config.seed)
    update: dict[str, object] = {
        "seed": seed,
        "reproducible": config.reproducible or pref.reproducible,
    }
    if config.solver is not None:
        update["solver"] = config.solver.model_copy(update={"seed": seed})
    if config.trainer is not None:
        update["trainer"] = config.trainer.model_copy(update={"seed": seed})
    config = config.model_copy(update=update)
    apply_reproducibility(config.reproducible)
    return config


def require_paths(config: RunConfig, *names: str) -> list[Path]:
    """Paths a command cannot run without, from flags or the config file."""
    missing = [name for name in names if name not in config.paths]
    if missing:
        raise click.UsageError(
            f"Missing option(s): {', '.join('--' + n.replace('_', '-') for n in missing)}"
        )
    return [Path(config.paths[name]) for name in names]


def _prior_overrides(mu1: float, mu2: float, latent_dim: int) -> FlatConfig:
    priors = [
        GaussianPrior(mean=[mu] * latent_dim, variance=[1.0] * latent_dim) for mu in (mu1, mu2)
    ]
    flat: FlatConfig = {}
    for index, prior in enumerate(priors):
        flat[f"hp.priors.{index}.mean"] = list(prior.mean)
        flat[f"hp.priors.{index}.variance"] = list(prior.variance)
    return flat


# ============================================================================
# Shared options
# ============================================================================

_SOLVER_KEYS = {
    "seed": "seed",
    "reproducible": "reproducible",
    "nu": "hp.nu",
    "lam": "hp.lam",
    "mc_samples": "hp.mc_samples",
    "reduced_variance": "hp.reduced_variance",
    "init_mode": "solver.init_mode",
    "iters": "solver.max_iters",
    "lr": "solver.learning_rate",
    "optimizer": "solver.optimizer",
    "early_stop": "solver.early_stop",
    "clip_radius": "solver.clip_radius",
    "depth": "solver.network.depth",
    "base_channels": "solver.network.base_channels",
    "activation": "solver.network.activation",
}


def solver_options[F: Callable[..., object]](init_default: str) -> Callable[[F], F]:
    """Options shared by ``segment`` and ``segment-multi``."""
    options = [
        click.option("--config", "config_file", type=click.Path(dir_okay=False, path_type=Path), help="Replay settings from a saved run_config.toml"),
        click.option("--init", "init_mode", default=init_default, show_default=True, help="otsu | center | random | mask:PATH"),
        click.option("--nu", type=click.FloatRange(min=0, min_open=True), default=DeepCVConfig.DEFAULT_NU, show_default=True, help="TV weight"),
        click.option("--lambda", "lam", type=click.FloatRange(min=0, min_open=True), default=DeepCVConfig.DEFAULT_LAMBDA, show_default=True, help="Splitting penalty"),
        click.option("--iters", type=click.IntRange(min=0), default=DeepCVConfig.DEFAULT_MAX_ITERS, show_default=True, help="Iteration cap"),
        click.option("--lr", type=click.FloatRange(min=0, min_open=True), default=DeepCVConfig.DEFAULT_LEARNING_RATE, show_default=True, help="Step size of every parameter block"),
        click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default="adam", show_default=True),
        click.option("--early-stop/--no-early-stop", default=True, show_default=True, help="Stop when the energy stagnates"),
        click.option("--clip-radius", type=click.FloatRange(min=0, min_open=True), default=None, help="Clamp parameters to [-r, r] after each step"),
        click.option("--mc-samples", type=click.IntRange(min=1), default=DeepCVConfig.DEFAULT_MC_SAMPLES, show_default=True, help="Monte-Carlo samples per energy evaluation"),
        click.option("--reduced-variance/--full-variance", default=True, show_default=True, help="Fix the encoder variance to 1"),
        click.option("--depth", type=click.IntRange(min=1), default=DeepCVConfig.UNET_DEPTH, show_default=True, help="U-net stages"),
        click.option("--base-channels", type=click.IntRange(min=1), default=DeepCVConfig.UNET_BASE_CHANNELS, show_default=True, help="U-net width"),
        click.option("--activation", type=click.Choice(["silu", "softplus", "sigmoid", "relu"]), default=DeepCVConfig.UNET_ACTIVATION, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True, help="Seed of every random stream (SEED env var wins)"),
        click.option("--reproducible", is_flag=True, help="Deterministic kernels, single thread"),
        click.option("--truth", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Ground-truth mask to score the result against"),
    ]

    def decorate(func: F) -> F:
        for option in reversed(options):
            func = option(func)
        return func

    return decorate


@contextmanager
def iteration_progress(ctx: click.Context, description: str, total: int) -> Iterator[OnIterationCallback]:
    """Rich progress bar fed by solver iteration events."""
    state: CliState = ctx.find_object(CliState) or CliState()
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TextColumn("E={task.fields[energy]:.5g}"),
        TimeElapsedColumn(),
        console=err_console,
        transient=True,
        disable=state.quiet,
    ) as progress:
        task = progress.add_task(description, total=total or None, energy=float("nan"))

        def on_iteration(event: IterationEvent) -> None:
            progress.update(task, completed=event.iteration, energy=event.total)

        yield on_iteration


def write_solve_outputs(config: RunConfig, mask: LabelMask, report: SolveReport, out: Path) -> None:
    """Mask at ``out``; report, trace and resolved config next to it."""
    save_mask(mask, out)
    directory = out.parent
    write_json(report, directory / DeepCVConfig.REPORT_FILENAME)
    write_trace_csv(report.trace, directory / DeepCVConfig.TRACE_FILENAME)
    save_run_config(config, directory / DeepCVConfig.RUN_CONFIG_FILENAME)


def print_solve_summary(report: SolveReport, out: Path, scores: ImageScores | None) -> None:
    table = Table(title=f"{report.solver} solve")
    table.add_column("Field", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Mask", str(out))
    table.add_row("Iterations", str(report.iterations))
    table.add_row("Final energy", f"{report.totals[-1]:.6g}" if report.trace else "n/a")
    table.add_row("Stopped early", str(report.stopped_early))
    table.add_row("Descent violations", str(report.descent_violations))
    table.add_row("Labels", str(report.final_mask_labels))
    table.add_row("Wall time", f"{report.wall_time:.2f}s")
    if scores is not None:
        table.add_row("mIoU", f"{scores.miou:.4f}")
        table.add_row("F-measure", f"{scores.f:.4f}")
        table.add_row("Accuracy", f"{scores.acc:.4f}")
    console.print(table)


def _score_against(truth_path: Path | None, mask: LabelMask, name: str) -> ImageScores | None:
    if truth_path is None:
        return None
    return score_masks(name, mask, load_mask(truth_path))


# ============================================================================
# Command group
# ============================================================================


@click.group()
@click.version_option(package_name="deepcv")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
@click.option("-q", "--quiet", is_flag=True, help="Warnings only, no progress bars")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, quiet: bool) -> None:
    """Unsupervised deep Chan-Vese segmentation."""
    configure_logging(verbose, quiet)
    ctx.obj = CliState(quiet=quiet)


@cli.command()
@click.option("--input", "input_path", type=click.Path(dir_okay=False, path_type=Path), help="Image to segment")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Output mask PNG")
@click.option("--mu1", type=float, default=10.0, show_default=True, help="Foreground prior mean")
@click.option("--mu2", type=float, default=-10.0, show_default=True, help="Background prior mean")
@click.option("--latent-dim", type=click.IntRange(min=1), default=1, show_default=True, help="Latent dimension d")
@solver_options(init_default="otsu")
@click.pass_context
@exit_codes
def segment(ctx: click.Context, **params: object) -> int:
    """Segment one image into foreground and background."""
    overrides = explicit_overrides(ctx, {**_SOLVER_KEYS, "input_path": "paths.input", "out": "paths.out"})
    if any(_given(ctx, name) for name in ("mu1", "mu2", "latent_dim")):
        overrides.update(
            _prior_overrides(float(params["mu1"]), float(params["mu2"]), int(params["latent_dim"]))  # pyright: ignore[reportArgumentType]
        )
    base = RunConfig(command="segment", hp=Hyperparams.from_preset("single"), solver=SolverConfig())
    config = resolve_config(base, params["config_file"], overrides)  # pyright: ignore[reportArgumentType]
    input_path, out = require_paths(config, "input", "out")
    assert config.hp is not None and config.solver is not None

    image = load_image(input_path)
    with iteration_progress(ctx, "segment", config.solver.max_iters) as on_iteration:
        mask, report = solve_single(image, config.hp, config.solver, on_iteration)
    write_solve_outputs(config, mask, report, out)
    print_solve_summary(report, out, _score_against(params["truth"], mask, input_path.stem))  # pyright: ignore[reportArgumentType]
    return 0


@cli.command("segment-multi")
@click.option("--input", "input_path", type=click.Path(dir_okay=False, path_type=Path), help="Image to segment")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Output label-mask PNG")
@click.option("--phases", type=click.IntRange(min=2), default=None, help="Number of regions N (>= 2)")
@click.option("--match", type=click.Choice(["exhaustive", "hungarian"]), default="exhaustive", show_default=True, help="Label matching used with --truth")
@solver_options(init_default="random")
@click.pass_context
@exit_codes
def segment_multi(ctx: click.Context, **params: object) -> int:
    """Segment one image into N regions with priors 5·e_i in an N-dimensional latent space."""
    config_file: Path | None = params["config_file"]  # pyright: ignore[reportAssignmentType]
    phases = params["phases"]
    if phases is None and config_file is not None:
        phases = load_flat(config_file).get("options.phases")
    if not isinstance(phases, int):
        raise click.UsageError("Missing option '--phases'")

    overrides = explicit_overrides(ctx, {**_SOLVER_KEYS, "input_path": "paths.input", "out": "paths.out"})
    base = RunConfig(
        command="segment-multi",
        options={"phases": phases},
        hp=Hyperparams.from_preset("multiphase", n_phases=phases),
        solver=SolverConfig(init_mode="random"),
    )
    config = resolve_config(base, config_file, {**overrides, "options.phases": phases})
    input_path, out = require_paths(config, "input", "out")
    assert config.hp is not None and config.solver is not None

    image = load_image(input_path)
    with iteration_progress(ctx, f"segment-multi N={phases}", config.solver.max_iters) as on_iteration:
        mask, report = solve_multiphase(image, phases, config.hp, config.solver, on_iteration)
    write_solve_outputs(config, mask, report, out)

    scores = None
    truth_path: Path | None = params["truth"]  # pyright: ignore[reportAssignmentType]
    if truth_path is not None:
        scores = score_masks(input_path.stem, mask, load_mask(truth_path), params["match"])  # pyright: ignore[reportArgumentType]
    print_solve_summary(report, out, scores)
    return 0


@cli.command()
@click.option("--data", type=click.Path(file_okay=False, path_type=Path), help="Dataset root with images/ and optional masks/")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Checkpoint directory")
@click.option("--epochs", type=click.IntRange(min=1), default=DeepCVConfig.DATASET_EPOCHS, show_default=True)
@click.option("--batch", type=click.IntRange(min=1), default=DeepCVConfig.DATASET_BATCH_SIZE, show_default=True)
@click.option("--lr", type=click.FloatRange(min=0, min_open=True), default=DeepCVConfig.DATASET_LEARNING_RATE, show_default=True)
@click.option("--image-size", type=click.IntRange(min=2), default=DeepCVConfig.DATASET_IMAGE_SIZE, show_default=True, help="Center-crop and resize side length")
@click.option("--aui/--no-aui", default=True, show_default=True, help="Augmentation-invariance regularizer")
@click.option("--cri/--no-cri", default=True, show_default=True, help="Conservation-of-region-information regularizer")
@click.option("--mc-samples", type=click.IntRange(min=1), default=DeepCVConfig.DEFAULT_MC_SAMPLES, show_default=True)
@click.option("--reduced-variance/--full-variance", default=False, show_default=True)
@click.option("--depth", type=click.IntRange(min=1), default=DeepCVConfig.UNET_DEPTH, show_default=True)
@click.option("--base-channels", type=click.IntRange(min=1), default=DeepCVConfig.UNET_BASE_CHANNELS, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--reproducible", is_flag=True)
@click.option("--config", "config_file", type=click.Path(dir_okay=False, path_type=Path))
@click.pass_context
@exit_codes
def train(ctx: click.Context, **params: object) -> int:
    """Train encoder, decoder, segmenter and discriminator on a dataset."""
    keys = {
        "data": "paths.data",
        "out": "paths.out",
        "seed": "seed",
        "reproducible": "reproducible",
        "epochs": "trainer.epochs",
        "batch": "trainer.batch_size",
        "lr": "trainer.learning_rate",
        "image_size": "trainer.image_size",
        "aui": "trainer.use_aui",
        "cri": "trainer.use_cri",
        "mc_samples": "hp.mc_samples",
        "reduced_variance": "hp.reduced_variance",
        "depth": "trainer.network.depth",
        "base_channels": "trainer.network.base_channels",
    }
    base = RunConfig(
        command="train",
        hp=Hyperparams.from_preset("dataset"),
        trainer=DatasetTrainerConfig(),
    )
    config = resolve_config(base, params["config_file"], explicit_overrides(ctx, keys))  # pyright: ignore[reportArgumentType]
    data, out = require_paths(config, "data", "out")
    assert config.hp is not None and config.trainer is not None

    layout = DatasetLayout(data)
    split = layout.load_split(seed=config.seed)
    state: CliState = ctx.find_object(CliState) or CliState()
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=err_console,
        transient=True,
        disable=state.quiet,
    ) as progress:
        task = progress.add_task("train", total=config.trainer.epochs)
        on_epoch: OnEpochCallback = lambda record: progress.update(task, completed=record.epoch)  # noqa: E731
        _, report = train_dataset(layout, split, config.hp, config.trainer, out, on_epoch)

    write_rows(out / DeepCVConfig.EPOCHS_FILENAME, EPOCH_COLUMNS, [r.model_dump() for r in report.epochs])
    write_json(report, out / DeepCVConfig.TRAINING_REPORT_FILENAME)
    save_run_config(config, out / DeepCVConfig.RUN_CONFIG_FILENAME)
    _print_epochs(report.epochs, report.best_epoch)
    console.print(
        f"Best epoch {report.best_epoch} ({report.selected_by}) saved as "
        f"[bold]{out / BEST_CHECKPOINT}[/bold]"
    )
    return 0


def _print_epochs(records: list[EpochRecord], best_epoch: int) -> None:
    table = Table(title="Training")
    for column in EPOCH_COLUMNS:
        table.add_column(column, justify="right")
    for r in records:
        style = "bold green" if r.epoch == best_epoch else None
        table.add_row(
            str(r.epoch),
            f"{r.energy:.4g}",
            f"{r.aug_bce:.4g}",
            f"{r.disc_bce:.4g}",
            f"{r.cri:.4g}",
            "-" if r.val_acc is None else f"{r.val_acc:.4f}",
            "-" if r.val_miou is None else f"{r.val_miou:.4f}",
            style=style,
        )
    console.print(table)


def list_images(directory: Path) -> list[Path]:
    """Images of a plain directory, or of ``directory/images`` for a dataset root."""
    if (directory / "images").is_dir():
        directory = directory / "images"
    if not directory.is_dir():
        raise InvalidInputError(f"Not a directory: {directory}")
    return sorted(
        p for p in directory.iterdir() if p.suffix.lower() in DeepCVConfig.IMAGE_EXTENSIONS
    )


@cli.command()
@click.option("--checkpoint", "checkpoint_dir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Directory written by 'train'")
@click.option("--images", "images_dir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Image directory (or dataset root)")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output mask directory")
@click.option("--name", default=BEST_CHECKPOINT, show_default=True, help="Checkpoint name")
@exit_codes
def infer(checkpoint_dir: Path, images_dir: Path, out: Path, name: str) -> int:
    """Segment every image of a directory with a trained segmentation network.

    Images are center-cropped and resized to the training size; masks are written at that size.
    """
    segmenter, size = load_segmenter(checkpoint_dir, name)
    channels = segmenter.net.spec.in_channels
    paths = list_images(images_dir)
    if not paths:
        raise InvalidInputError(f"No images found in {images_dir}")

    def infer_one(path: Path) -> OperationResult[str]:
        try:
            image = match_channels(center_crop_resize(load_image(path), size), channels)
            target = out / f"{path.stem}.png"
            save_mask(infer_dataset(segmenter, image), target)
            return OperationResult[str](success=f"Wrote {target}", data=str(target))
        except DeepCVError as e:
            return OperationResult[str](error=f"{path.name}: {e}")

    results = [infer_one(path) for path in paths]
    save_run_config(
        RunConfig(
            command="infer",
            paths={"checkpoint": str(checkpoint_dir), "images": str(images_dir), "out": str(out)},
            options={"name": name, "image_size": size},
        ),
        out / DeepCVConfig.RUN_CONFIG_FILENAME,
    )
    failures = [r.error for r in results if r.is_error]
    for message in failures:
        logger.error(message)
    console.print(f"Wrote {len(results) - len(failures)} masks to [bold]{out}[/bold]")
    return EXIT_FAILURES if failures else 0


def _mask_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise InvalidInputError(f"Not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".png")


@cli.command("eval")
@click.option("--pred", "pred_dir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Predicted masks")
@click.option("--truth", "truth_dir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Ground-truth masks (same file names)")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Directory for scores.csv and summary.json")
@click.option("--match", type=click.Choice(["exhaustive", "hungarian"]), default="exhaustive", show_default=True, help="Multi-phase label matching")
@click.option("--size", type=click.IntRange(min=2), default=None, help="Center-crop and resize both masks before scoring")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True, help="Images scored in parallel")
@exit_codes
def evaluate(
    pred_dir: Path, truth_dir: Path, out: Path, match: str, size: int | None, workers: int
) -> int:
    """Score predicted masks against ground truth (accuracy, F-measure, mIoU)."""
    truths = _mask_files(truth_dir)
    if not truths:
        raise InvalidInputError(f"No masks found in {truth_dir}")
    if not _mask_files(pred_dir):
        raise InvalidInputError(f"No masks found in {pred_dir}")

    def score_one(truth_path: Path) -> OperationResult[ImageScores]:
        try:
            truth = load_mask(truth_path)
            pred = load_mask(pred_dir / truth_path.name)
            if size is not None:
                truth = center_crop_resize_mask(truth, size)
                pred = center_crop_resize_mask(pred, size)
            scores = score_masks(truth_path.stem, pred, truth, match)  # pyright: ignore[reportArgumentType]
            return OperationResult[ImageScores](success="scored", data=scores)
        except DeepCVError as e:
            return OperationResult[ImageScores](error=f"{truth_path.name}: {e}")

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(score_one, truths))

    scored = [r.value_or_throw() for r in results if r.is_success]
    errors = [r.error for r in results if r.error is not None]
    for message in errors:
        logger.error(message)

    write_rows(
        out / DeepCVConfig.SCORES_FILENAME,
        SCORE_COLUMNS,
        [{**s.model_dump(), "flags": ";".join(s.flags)} for s in scored],
    )
    summary = EvalSummary.model_validate({**summarize(scored), "failures": len(errors), "errors": errors})
    write_json(summary, out / DeepCVConfig.SUMMARY_FILENAME)
    save_run_config(
        RunConfig(
            command="eval",
            paths={"pred": str(pred_dir), "truth": str(truth_dir), "out": str(out)},
            options={"match": match, "workers": workers, **({"size": size} if size else {})},
        ),
        out / DeepCVConfig.RUN_CONFIG_FILENAME,
    )

    table = Table(title=f"Evaluation ({summary.images} images, {summary.failures} failures)")
    for column in ("acc", "f", "miou", "precision", "recall"):
        table.add_column(column, justify="right")
    if scored:
        table.add_row(*(f"{getattr(summary, c):.4f}" for c in ("acc", "f", "miou", "precision", "recall")))
    console.print(table)
    return EXIT_FAILURES if errors else 0


@cli.command("plot-trace")
@click.argument("trace_csv", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Image path (default: <trace>.png)")
@click.option("--title", default="Energy trace", show_default=True)
@exit_codes
def plot_trace_cmd(trace_csv: Path, out: Path | None, title: str) -> int:
    """Plot the energy components of a trace CSV against the iteration."""
    trace = read_trace_csv(trace_csv)
    if not trace:
        raise InvalidInputError(f"{trace_csv}: trace has no rows")
    target = out or trace_csv.with_suffix(".png")
    plot_trace(trace, target, title)
    console.print(f"Wrote [bold]{target}[/bold]")
    return 0


def _parse_sigmas(ctx: click.Context, param: click.Parameter, value: str) -> list[float]:
    try:
        sigmas = [float(s) for s in value.split(",") if s.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from e
    if not sigmas or any(s < 0 for s in sigmas):
        raise click.BadParameter("need at least one sigma, all >= 0")
    return sigmas


@cli.command("noise-sweep")
@click.option("--sigmas", default="100,120,140,160", show_default=True, callback=_parse_sigmas, help="Noise std values in 0-255 units")
@click.option("--size", type=click.IntRange(min=2), default=64, show_default=True, help="Synthetic image side length")
@click.option("--iters", type=click.IntRange(min=0), default=DeepCVConfig.DEFAULT_MAX_ITERS, show_default=True, help="Deep solver iterations")
@click.option("--baseline-iters", type=click.IntRange(min=0), default=DeepCVConfig.BASELINE_MAX_ITERS, show_default=True)
@click.option("--depth", type=click.IntRange(min=1), default=DeepCVConfig.UNET_DEPTH, show_default=True)
@click.option("--base-channels", type=click.IntRange(min=1), default=DeepCVConfig.UNET_BASE_CHANNELS, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory")
@click.pass_context
@exit_codes
def noise_sweep(
    ctx: click.Context,
    sigmas: list[float],
    size: int,
    iters: int,
    baseline_iters: int,
    depth: int,
    base_channels: int,
    seed: int,
    out: Path,
) -> int:
    """Deep model versus Chan-Vese and Gaussian-region baselines on noisy disks."""
    seed = RunPref.from_env().resolve_seed(seed)
    hp = Hyperparams.from_preset("single")
    cfg = SolverConfig.model_validate(
        {"max_iters": iters, "seed": seed, "network": {"depth": depth, "base_channels": base_channels}}
    )
    methods: dict[str, Callable[..., tuple[LabelMask, SolveReport]]] = {
        "deep_cv": lambda image: solve_single(image, hp, cfg),
        "chan_vese": lambda image: solve_cv_baseline(image, iters=baseline_iters, seed=seed),
        "gaussian_region": lambda image: solve_gaussian_region_baseline(
            image, iters=baseline_iters, seed=seed
        ),
    }

    rows: list[dict[str, object]] = []
    state: CliState = ctx.find_object(CliState) or CliState()
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=err_console,
        transient=True,
        disable=state.quiet,
    ) as progress:
        task = progress.add_task("noise-sweep", total=len(sigmas) * len(methods))
        for sigma in sigmas:
            image, truth = make_synthetic("two_gaussian_disk", size, size, sigma, seed)
            for method, solve in methods.items():
                mask, _ = solve(image)
                scores = binary_scores(f"sigma_{sigma:g}", mask, truth)
                rows.append({"sigma": sigma, "method": method, "miou": scores.miou, "f": scores.f, "acc": scores.acc})
                logger.info(f"sigma={sigma:g} {method}: mIoU {scores.miou:.4f}")
                progress.advance(task)

    write_rows(out / DeepCVConfig.NOISE_SWEEP_FILENAME, SWEEP_COLUMNS, rows)
    save_run_config(
        RunConfig(
            command="noise-sweep",
            seed=seed,
            paths={"out": str(out)},
            options={
                "sigmas": ",".join(f"{s:g}" for s in sigmas),
                "size": size,
                "baseline_iters": baseline_iters,
            },
            hp=hp,
            solver=cfg,
        ),
        out / DeepCVConfig.RUN_CONFIG_FILENAME,
    )

    table = Table(title="Noise sweep (mIoU)")
    table.add_column("sigma", justify="right")
    for method in methods:
        table.add_column(method, justify="right")
    for sigma in sigmas:
        values = {r["method"]: r["miou"] for r in rows if r["sigma"] == sigma}
        table.add_row(f"{sigma:g}", *(f"{values[m]:.4f}" for m in methods))  # pyright: ignore[reportArgumentType]
    console.print(table)
    return 0


def main() -> None:
    """Console script entry point."""
    cli(prog_name="deepcv")


if __name__ == "__main__":
    main()
