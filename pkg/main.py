# Standard library imports
import argparse
import json
import logging
import sys
import typing
from pathlib import Path
from typing import Any, Dict, List, Optional

# Third-party imports
from rich.console import Console
from rich.table import Table

# Local imports
from app.core.config import settings
from app.core.errors import DeepISPError
from app.core.schemas import TrainConfig
from app.imaging.bayer import BayerPattern

# Configure logging
logging.basicConfig(level=settings.LOG_LEVEL.upper())
logger = logging.getLogger(__name__)

console = Console()

# Fields with no command-line flag
_HIDDEN_FIELDS = {"version"}


def _is_bool_field(annotation: Any) -> bool:
    return annotation is bool or bool in typing.get_args(annotation)


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """One flag per TrainConfig field, layered over an optional --config file"""
    parser.add_argument("--config", type=Path, help="JSON experiment config; flags override its values")
    group = parser.add_argument_group("experiment")
    for name, info in TrainConfig.model_fields.items():
        if name in _HIDDEN_FIELDS:
            continue
        flag = f"--{name.replace('_', '-')}"
        if _is_bool_field(info.annotation):
            group.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS)
        else:
            group.add_argument(flag, dest=name, default=argparse.SUPPRESS, help=f"(default: {info.default})")


def resolve_config(args: argparse.Namespace) -> TrainConfig:
    """Config file values overridden by explicit flags"""
    values: Dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for name in TrainConfig.model_fields:
        if name in vars(args):
            values[name] = getattr(args, name)
    return TrainConfig.model_validate(values)


def cmd_synth(args: argparse.Namespace) -> int:
    """Write a synthetic paired dataset in the flat layout"""
    from app.services.synth_service import SynthService

    manifest = SynthService(resolve_config(args), progress=not args.no_progress).run()
    console.print(f"Synthetic dataset written; manifest at {manifest}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """Train (or resume) one experiment"""
    from app.services.trainer_service import TrainerService

    config = resolve_config(args)
    result = TrainerService(config, progress=not args.no_progress).run(resume=args.resume)
    final = result.final_train_loss
    loss_text = f"{final:.6g}" if final is not None else "n/a"
    console.print(f"Trained to epoch {result.epoch} (final train loss {loss_text}); checkpoint {result.checkpoint_path}")
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    """Run a checkpoint on a raw image or a directory of them"""
    from app.services.inference_service import InferenceService

    service = InferenceService.from_checkpoint(args.checkpoint)
    written = service.infer_path(args.input, args.output, stretch=args.stretch, pattern=BayerPattern(args.pattern))
    console.print(f"Wrote {len(written)} image(s)")
    return 0


def _eval_dataset(config: TrainConfig):
    from app.data.loaders import load_pair_dir
    from app.services.trainer_service import build_datasets

    if config.data_source == "dir":
        variant = "low_light" if config.exposure < 1.0 else "well_lit"
        return load_pair_dir(config.data_dir, config.layout, variant=variant, pattern=config.pattern)
    return build_datasets(config).test


def cmd_eval(args: argparse.Namespace) -> int:
    """Score a checkpoint and/or the bilinear baseline on a dataset"""
    from app.services.evaluation_service import EvaluationService
    from app.services.inference_service import InferenceService

    config = resolve_config(args)
    inference = InferenceService.from_checkpoint(args.checkpoint) if args.checkpoint else None
    service = EvaluationService(inference, config.to_loss_config())
    report = service.evaluate(_eval_dataset(config), baseline=args.baseline, fingerprint=config.fingerprint())
    destination = Path(args.report) if args.report else settings.resolve_output(config.output_dir) / "eval_report.csv"
    report.to_csv(destination)

    table = Table(row_styles=["", "dim"])
    for column in ("Tag", "PSNR linear (dB)", "PSNR sRGB (dB)", "MS-SSIM"):
        table.add_column(column, justify="right", style="deep_sky_blue1")
    for tag in report.tags:
        means = report.aggregate(tag)
        table.add_row(tag, f"{means['psnr_linear']:.2f}", f"{means['psnr_srgb']:.2f}", f"{means['ms_ssim']:.4f}")
    console.print(table)
    console.print(report.summary().splitlines()[0])
    console.print(f"Report written to {destination}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """Finite-difference verification of every op and the end-to-end loss"""
    from app.checks import registry

    reports = registry.run_all(seed=args.seed, points=args.points, only=args.only)
    table = Table(row_styles=["", "dim"])
    for column in ("Check", "Max rel. error", "Worst leaf", "Points", "Coordinates", "Status"):
        table.add_column(column, justify="left", style="deep_sky_blue1")
    for report in reports:
        status = "[green]PASS[/green]" if report.passed else "[red]FAIL[/red]"
        table.add_row(
            report.name, f"{report.max_error:.3e}", report.parameter or "-", str(report.points),
            str(report.coordinates), status,
        )
    console.print(table)
    failed = [report.name for report in reports if not report.passed]
    if failed:
        console.print(f"[red]Gradient check failed for: {', '.join(failed)}[/red]")
        return 1
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    """Train one model per depth or width value"""
    from app.services.experiment_service import ExperimentService

    path = ExperimentService(resolve_config(args), progress=not args.no_progress).sweep(args.axis, args.values)
    console.print(f"Sweep written to {path}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    """Train matched arms with and without an architectural feature"""
    from app.services.experiment_service import ExperimentService

    summary = ExperimentService(resolve_config(args), progress=not args.no_progress).ablate(args.mode)
    console.print(summary.text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepisp", description="Train, evaluate and verify the two-stage learned ISP network"
    )
    parser.add_argument("--no-progress", action="store_true", help="Disable progress bars")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="Write a synthetic paired dataset")
    add_config_arguments(synth)
    synth.set_defaults(handler=cmd_synth)

    train = commands.add_parser("train", help="Train a model")
    add_config_arguments(train)
    train.add_argument("--resume", action="store_true", help="Continue from the run directory's checkpoint")
    train.set_defaults(handler=cmd_train)

    infer = commands.add_parser("infer", help="Process raw images with a checkpoint")
    infer.add_argument("--checkpoint", type=Path, required=True)
    infer.add_argument("--input", type=Path, required=True, help="Image file or directory")
    infer.add_argument("--output", type=Path, required=True, help="Output file or directory")
    infer.add_argument("--stretch", action="store_true", help="Apply the 5%% histogram stretch")
    infer.add_argument(
        "--pattern", default=settings.DEFAULT_BAYER_PATTERN, choices=[p.value for p in BayerPattern]
    )
    infer.set_defaults(handler=cmd_infer)

    evaluate = commands.add_parser("eval", help="Evaluate a checkpoint against targets")
    add_config_arguments(evaluate)
    evaluate.add_argument("--checkpoint", type=Path, help="Omit to score the bilinear baseline only")
    evaluate.add_argument("--baseline", action=argparse.BooleanOptionalAction, default=True)
    evaluate.add_argument("--report", type=Path, help="CSV destination (default: <output-dir>/eval_report.csv)")
    evaluate.set_defaults(handler=cmd_eval)

    gradcheck = commands.add_parser("gradcheck", help="Verify gradients against finite differences")
    gradcheck.add_argument("--points", type=int, help="Random points per check (default: per check)")
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--only", nargs="+", help="Run only these checks")
    gradcheck.set_defaults(handler=cmd_gradcheck)

    sweep = commands.add_parser("sweep", help="Depth or width sweep")
    add_config_arguments(sweep)
    sweep.add_argument("--axis", choices=["depth", "width"], required=True)
    sweep.add_argument("--values", type=int, nargs="+", required=True)
    sweep.set_defaults(handler=cmd_sweep)

    ablate = commands.add_parser("ablate", help="Skip-connection or shared-feature ablation")
    add_config_arguments(ablate)
    ablate.add_argument("--mode", choices=["no_skip", "no_shared"], required=True)
    ablate.set_defaults(handler=cmd_ablate)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (DeepISPError, ValueError) as e:
        logger.error(f"{args.command} failed: {str(e)}", exc_info=settings.LOG_LEVEL.upper() == "DEBUG")
        console.print(f"[red]Error:[/red] {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
