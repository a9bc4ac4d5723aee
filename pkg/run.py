"""
Main entry point for the canonslr pipeline.

    python run.py gen-data --config configs/desk.cfg
    python run.py train-teacher --config configs/desk.cfg
    python run.py train-student --config configs/desk.cfg --set distill.weight=20
    python run.py evaluate --config configs/desk.cfg --split test
    python run.py ablate --config configs/desk.cfg --axis modules --seeds 0,1,2
    python run.py plot
"""

import argparse
import sys
from pathlib import Path

import torch

import config
from canonslr.ablation import AXES, run_ablation
from canonslr.checkpoint import load_checkpoint
from canonslr.errors import CanonSLRError, ConfigError
from canonslr.logger import get_logger
from canonslr.manifest import SPLITS, read_manifest
from canonslr.metrics import write_report
from canonslr.plots import EXAMPLES_SUFFIX, make_example_plots, make_plots
from canonslr.settings import Settings, load_settings
from canonslr.synthviews import generate_dataset
from canonslr.trainer import recognition_examples, train_student, train_teacher
from canonslr.trainer import evaluate as evaluate_checkpoint

logger = get_logger(__name__)


def _data_dir(out: Path) -> Path:
    return out / "data"


def _checkpoint_dir(out: Path, settings: Settings, role: str) -> Path:
    return out / settings.train.checkpoint_dir / role


def gen_data(settings: Settings, out: Path, args):
    """Generate the synthetic multi-view dataset."""
    logger.info("--- Generating dataset ---")
    manifest = generate_dataset(settings.data, _data_dir(out))
    sources = len({entry.source_id for entry in manifest.entries})
    logger.info("Dataset complete: %d sources, %d entries", sources, len(manifest.entries))


def train_teacher_step(settings: Settings, out: Path, args):
    """Stage I: anchor-view teacher."""
    logger.info("--- Training teacher ---")
    manifest = read_manifest(_data_dir(out))
    checkpoint = train_teacher(manifest, settings.train, _checkpoint_dir(out, settings, "teacher"))
    logger.info("Teacher complete: %d epochs, final dev WER %s", checkpoint.epoch, checkpoint.history[-1]["dev_wer"])


def train_student_step(settings: Settings, out: Path, args):
    """Stage II: multi-view student under the frozen teacher."""
    logger.info("--- Training student ---")
    manifest = read_manifest(_data_dir(out))
    teacher = None
    if settings.train.distill.weight > 0:
        teacher = load_checkpoint(_checkpoint_dir(out, settings, "teacher"))
    checkpoint = train_student(manifest, teacher, settings.train, _checkpoint_dir(out, settings, "student"))
    logger.info("Student complete: %d epochs, final dev WER %s", checkpoint.epoch, checkpoint.history[-1]["dev_wer"])


def evaluate(settings: Settings, out: Path, args):
    """Per-view WER report of one checkpoint on one split."""
    logger.info("--- Evaluating %s on %s ---", args.role, args.split)
    manifest = read_manifest(_data_dir(out))
    checkpoint = load_checkpoint(_checkpoint_dir(out, settings, args.role))
    report = evaluate_checkpoint(checkpoint, manifest, args.split, settings.train.beam_width)
    reports = out / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    path = reports / f"{args.role}_{args.split}.tsv"
    write_report(report, path)
    source_id = args.source or manifest.select(args.split)[0].source_id
    examples = recognition_examples({args.role: checkpoint}, manifest, source_id, settings.train.beam_width)
    write_report(examples, reports / f"{args.role}_{args.split}{EXAMPLES_SUFFIX}")
    overall = report.loc[report["name"] == "All"].iloc[0]
    logger.info(
        "Evaluation complete: WER %.2f%% (del %.2f, ins %.2f, sub %.2f) over %d samples -> %s",
        overall["WER"], overall["del"], overall["ins"], overall["sub"], overall["n_samples"], path,
    )


def ablate(settings: Settings, out: Path, args):
    """One ablation axis."""
    logger.info("--- Ablation: %s ---", args.axis)
    manifest = read_manifest(_data_dir(out))
    written = run_ablation(args.axis, manifest, settings.train, out / "ablation", seeds=args.seeds)
    logger.info("Ablation complete: %d table(s) written", len(written))


def plot(settings: Settings, out: Path, args):
    """Figures from the ablation tables and the per-view examples."""
    logger.info("--- Plotting ---")
    plots_dir = out / "plots"
    written = make_plots(out / "ablation", plots_dir)
    written += make_example_plots(out / "reports", _data_dir(out), plots_dir, args.source)
    logger.info("Plotting complete: %d figure(s)", len(written))


# Single source of truth for command name -> function mapping.
COMMANDS = {
    "gen-data": gen_data,
    "train-teacher": train_teacher_step,
    "train-student": train_student_step,
    "evaluate": evaluate,
    "ablate": ablate,
    "plot": plot,
}


def _seed_list(value: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from e
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Canonical-view guided multi-view sign recognition")
    parser.add_argument("command", choices=list(COMMANDS), help="Pipeline command to run")
    parser.add_argument("--config", type=str, default=None, help="Flat key=value config file")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Override one config key (repeatable)",
    )
    parser.add_argument("--out", type=str, default=config.CANONSLR_OUT, help="Output root directory")
    parser.add_argument("--seed", type=int, default=None, help="Seed for generation and training")
    parser.add_argument("--split", choices=SPLITS, default="test", help="Split to evaluate")
    parser.add_argument("--source", type=str, default=None, help="Source decoded under every view by evaluate and drawn by plot (default: first of --split)")
    parser.add_argument("--role", choices=("teacher", "student"), default="student", help="Checkpoint to evaluate")
    parser.add_argument("--axis", choices=AXES, default="modules", help="Ablation axis")
    parser.add_argument("--seeds", type=_seed_list, default=None, help="Comma-separated ablation seeds")
    return parser


def main(argv=None) -> int:
    """Main function; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = load_settings(args.config, args.overrides, args.seed)
    except ConfigError as e:
        parser.error(str(e))
    if args.seeds is None:
        args.seeds = (settings.train.seed,)

    if config.TORCH_THREADS > 0:
        torch.set_num_threads(config.TORCH_THREADS)

    out = Path(args.out)
    try:
        COMMANDS[args.command](settings, out, args)
    except (CanonSLRError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
