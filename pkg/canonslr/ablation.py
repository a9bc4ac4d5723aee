"""
Ablation grids over a generated dataset.

Every axis trains one teacher per (anchor view, seed), a student per grid
cell and seed, evaluates on dev and test, averages over seeds and writes a
tab-separated table to `<out>/ablation/<axis>.tsv`. Cell artifacts land in
`<out>/ablation/<axis>/<cell>/seed<k>/`.
"""

import dataclasses
from pathlib import Path

import numpy as np
import pandas as pd

from canonslr.errors import DataIntegrityError, InvalidArgumentError
from canonslr.logger import get_logger
from canonslr.manifest import DatasetManifest
from canonslr.settings import TrainConfig
from canonslr.trainer import evaluate, train_student, train_teacher
from canonslr.views import FRONT, VIEW_CATEGORIES, VIEW_NAMES

logger = get_logger(__name__)

AXES = ("modules", "placement", "lambda", "anchor", "guidance")
LAMBDA_GRID = (5.0, 10.0, 20.0, 40.0, 80.0)
ANCHOR_GRID = ("Front", "L60", "R45", "D30")
PLACEMENT_GRID = {"layer3": (3,), "layer4": (4,), "layer3+4": (3, 4)}
REPORT_NAMES = tuple(VIEW_CATEGORIES) + ("All",)
RATE_COLUMNS = ["WER", "del", "ins", "sub"]


def _with(cfg: TrainConfig, **changes) -> TrainConfig:
    """Copy of `cfg` with top-level and `distill.<field>` changes applied."""
    distill_changes = {k.split(".", 1)[1]: v for k, v in changes.items() if k.startswith("distill.")}
    top = {k: v for k, v in changes.items() if not k.startswith("distill.")}
    if distill_changes:
        top["distill"] = dataclasses.replace(cfg.distill, **distill_changes)
    return dataclasses.replace(cfg, **top)


class AblationRunner:
    """Trains and evaluates grid cells, reusing teachers across cells."""

    def __init__(self, manifest: DatasetManifest, cfg: TrainConfig, out_dir, seeds=(0,)):
        self.manifest = manifest
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.seeds = tuple(seeds)
        self._teachers = {}

    def teacher(self, anchor: str, seed: int):
        key = (anchor, seed)
        if key not in self._teachers:
            cfg = _with(self.cfg, seed=seed, **{"distill.frontal_view": anchor})
            directory = self.out_dir / "teachers" / f"{anchor}_seed{seed}"
            self._teachers[key] = train_teacher(self.manifest, cfg, directory)
        return self._teachers[key]

    def cell(self, axis: str, name: str, **changes) -> dict:
        """
        Train and evaluate one grid cell for every seed.

        Returns:
            {"dev": report, "test": report, "curves": [per-seed dev WER lists]},
            reports averaged over seeds
        """
        reports = {"dev": [], "test": []}
        curves = []
        for seed in self.seeds:
            cfg = _with(self.cfg, seed=seed, **changes)
            teacher = self.teacher(cfg.distill.frontal_view, seed) if cfg.distill.weight > 0 else None
            directory = self.out_dir / axis / name / f"seed{seed}"
            student = train_student(self.manifest, teacher, cfg, directory)
            for split in reports:
                reports[split].append(evaluate(student, self.manifest, split, cfg.beam_width))
            curves.append([record["dev_wer"] for record in student.history])
        logger.info("Finished %s cell %s over %d seed(s)", axis, name, len(self.seeds))
        return {split: average_reports(frames) for split, frames in reports.items()} | {"curves": curves}


def average_reports(reports) -> pd.DataFrame:
    """Row-by-row mean of per-seed reports; `n_samples` is kept from the first."""
    names = reports[0]["name"].tolist()
    if any(report["name"].tolist() != names for report in reports):
        raise DataIntegrityError("Per-seed reports do not list the same rows")
    averaged = reports[0].copy()
    averaged[RATE_COLUMNS] = np.mean([report[RATE_COLUMNS].to_numpy(dtype=float) for report in reports], axis=0)
    return averaged


def _wer(report: pd.DataFrame, name: str) -> float:
    rows = report.loc[report["name"] == name, "WER"]
    if len(rows) > 1:
        raise DataIntegrityError(f"Report lists {len(rows)} rows named {name!r}")
    return float(rows.iloc[0]) if len(rows) else float("nan")


def modules_table(runner: AblationRunner) -> pd.DataFrame:
    """Baseline / +SSD / +TME / +SSD+TME with per-category test WER and deltas vs Baseline."""
    weight = runner.cfg.distill.weight
    stages = runner.cfg.tme_stages or (3, 4)
    grid = [
        ("Baseline", "baseline", {"distill.weight": 0.0, "tme_stages": ()}),
        ("+SSD", "ssd", {"distill.weight": weight, "tme_stages": ()}),
        ("+TME", "tme", {"distill.weight": 0.0, "tme_stages": stages}),
        ("+SSD+TME", "ssd_tme", {"distill.weight": weight, "tme_stages": stages}),
    ]
    rows = []
    for name, directory, changes in grid:
        report = runner.cell("modules", directory, **changes)["test"]
        rows.append({"setting": name, **{col: _wer(report, col) for col in REPORT_NAMES}})
    table = pd.DataFrame(rows)
    return add_deltas(table, REPORT_NAMES, baseline_row=0)


def add_deltas(table: pd.DataFrame, columns, baseline_row: int = 0) -> pd.DataFrame:
    """Insert a `<col> Δ` column (row minus baseline row) after every listed column."""
    out = table.copy()
    for column in columns:
        position = out.columns.get_loc(column) + 1
        out.insert(position, f"{column} Δ", out[column] - out[column].iloc[baseline_row])
    return out


def placement_table(runner: AblationRunner) -> pd.DataFrame:
    rows = []
    for name, stages in PLACEMENT_GRID.items():
        result = runner.cell("placement", name.replace("+", "_"), tme_stages=stages)
        rows.append({"placement": name, "dev WER": _wer(result["dev"], "All"), "test WER": _wer(result["test"], "All")})
    return pd.DataFrame(rows)


def lambda_table(runner: AblationRunner) -> pd.DataFrame:
    rows = []
    for weight in LAMBDA_GRID:
        result = runner.cell("lambda", f"lambda{weight:g}", **{"distill.weight": weight})
        rows.append({"lambda": weight, "dev WER": _wer(result["dev"], "All"), "test WER": _wer(result["test"], "All")})
    return pd.DataFrame(rows)


def anchor_table(runner: AblationRunner) -> pd.DataFrame:
    """Test WER overall, averaged over the six side views, and on Front, per anchor view."""
    side_views = [view for view in VIEW_NAMES if view != FRONT]
    rows = []
    for anchor in ANCHOR_GRID:
        report = runner.cell("anchor", anchor, **{"distill.frontal_view": anchor})["test"]
        rows.append({
            "anchor": anchor,
            "All": _wer(report, "All"),
            "All side-view": float(np.mean([_wer(report, view) for view in side_views])),
            "Front": _wer(report, FRONT),
        })
    return pd.DataFrame(rows)


def guidance_tables(runner: AblationRunner) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Final WER and per-epoch dev curves for paired-anchor vs own-view teacher input."""
    rows, curve_rows = [], []
    for mode in ("paired", "own"):
        result = runner.cell("guidance", mode, **{"distill.teacher_input": mode})
        rows.append({"guidance": mode, "dev WER": _wer(result["dev"], "All"), "test WER": _wer(result["test"], "All")})
        curves = np.array([[np.nan if v is None else v for v in curve] for curve in result["curves"]], dtype=float)
        for epoch, value in enumerate(np.nanmean(curves, axis=0), start=1):
            curve_rows.append({"guidance": mode, "epoch": epoch, "dev WER": float(value)})
    return pd.DataFrame(rows), pd.DataFrame(curve_rows)


def run_ablation(axis: str, manifest: DatasetManifest, cfg: TrainConfig, out_dir, seeds=(0,)) -> dict[str, Path]:
    """
    Run one ablation axis and write its table(s).

    Args:
        axis: One of AXES
        manifest: Generated dataset
        cfg: Base training settings; each cell changes only its own axis
        out_dir: Ablation output root
        seeds: Seeds every cell is averaged over

    Returns:
        Table name -> written TSV path
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runner = AblationRunner(manifest, cfg, out_dir, seeds)

    if axis == "modules":
        tables = {"modules": modules_table(runner)}
    elif axis == "placement":
        tables = {"placement": placement_table(runner)}
    elif axis == "lambda":
        tables = {"lambda": lambda_table(runner)}
    elif axis == "anchor":
        tables = {"anchor": anchor_table(runner)}
    elif axis == "guidance":
        final, curves = guidance_tables(runner)
        tables = {"guidance": final, "guidance_curves": curves}
    else:
        raise InvalidArgumentError(f"Unknown ablation axis {axis!r}; expected one of {AXES}")

    written = {}
    for name, table in tables.items():
        path = out_dir / f"{name}.tsv"
        table.to_csv(path, sep="\t", index=False, float_format="%.2f")
        written[name] = path
        logger.info("Wrote %s (%d rows)", path, len(table))
    return written
