"""
Static figures: the ablation tables, one source seen from every view, and
the decoded glosses of each view next to the reference.

Every figure is one PNG plus a CSV copy of the plotted table in
`<out>/plots`. The ablation figures read only the TSV tables under
`<out>/ablation`. matplotlib and seaborn are imported on first use so
the rest of the package works without them.
"""

from pathlib import Path

import numpy as np
import pandas as pd

from canonslr.errors import ArtifactIOError
from canonslr.logger import get_logger
from canonslr.manifest import MANIFEST_FILE, DatasetManifest, read_frames, read_manifest
from canonslr.views import VIEW_NAMES, view_by_name

logger = get_logger(__name__)

# Per-source decoded examples written next to the WER reports.
EXAMPLES_SUFFIX = "_examples.tsv"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import seaborn as sns

    sns.set_theme(style="whitegrid", context="paper")
    return plt, sns


def _save(fig, table: pd.DataFrame, out_dir: Path, name: str) -> Path:
    png = out_dir / f"{name}.png"
    fig.tight_layout()
    fig.savefig(png, dpi=150, metadata={"Software": None})
    table.to_csv(out_dir / f"{name}.csv", index=False)
    return png


def plot_lambda(table: pd.DataFrame, out_dir: Path) -> Path:
    plt, sns = _pyplot()
    long = table.melt(id_vars="lambda", value_vars=["dev WER", "test WER"], var_name="split", value_name="WER")
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    sns.lineplot(data=long, x="lambda", y="WER", hue="split", marker="o", ax=ax)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("distillation weight")
    ax.set_ylabel("WER (%)")
    path = _save(fig, long, out_dir, "lambda")
    plt.close(fig)
    return path


def plot_modules(table: pd.DataFrame, out_dir: Path) -> Path:
    plt, sns = _pyplot()
    value_columns = [c for c in table.columns if c != "setting" and not c.endswith("Δ")]
    long = table.melt(id_vars="setting", value_vars=value_columns, var_name="group", value_name="WER")
    fig, ax = plt.subplots(figsize=(6.5, 3.2))
    sns.barplot(data=long, x="group", y="WER", hue="setting", ax=ax)
    ax.set_xlabel("")
    ax.set_ylabel("test WER (%)")
    path = _save(fig, long, out_dir, "modules")
    plt.close(fig)
    return path


def _bars(table: pd.DataFrame, key: str, out_dir: Path, name: str, ylabel: str) -> Path:
    plt, sns = _pyplot()
    value_columns = [c for c in table.columns if c != key]
    long = table.melt(id_vars=key, value_vars=value_columns, var_name="metric", value_name="WER")
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    sns.barplot(data=long, x=key, y="WER", hue="metric", ax=ax)
    ax.set_ylabel(ylabel)
    path = _save(fig, long, out_dir, name)
    plt.close(fig)
    return path


def plot_guidance_curves(table: pd.DataFrame, out_dir: Path) -> Path:
    plt, sns = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    sns.lineplot(data=table, x="epoch", y="dev WER", hue="guidance", ax=ax)
    ax.set_ylabel("dev WER (%)")
    path = _save(fig, table, out_dir, "guidance_curves")
    plt.close(fig)
    return path


def plot_view_grid(manifest: DatasetManifest, source_id: str, out_dir, columns: int = 4) -> Path:
    """
    One source rendered from every view: a row per view, `columns` evenly
    spaced frames per row.
    """
    plt, _ = _pyplot()
    out_dir = Path(out_dir)
    entries = [manifest.lookup(source_id, view) for view in VIEW_NAMES]
    num_frames = entries[0].num_frames
    picks = np.linspace(0, num_frames - 1, num=min(columns, num_frames)).round().astype(int)

    fig, axes = plt.subplots(len(entries), len(picks), figsize=(1.3 * len(picks), 1.3 * len(entries)), squeeze=False)
    rows = []
    for row, entry in enumerate(entries):
        frames = read_frames(manifest.frame_file(entry))
        view = view_by_name(entry.view)
        for col, t in enumerate(picks):
            ax = axes[row, col]
            ax.imshow(np.clip(frames[t].transpose(1, 2, 0), 0.0, 1.0), interpolation="nearest")
            ax.set_xticks([])
            ax.set_yticks([])
            if row == 0:
                ax.set_title(f"t={t}", fontsize=8)
        axes[row, 0].set_ylabel(entry.view, fontsize=8)
        rows.append({"view": entry.view, "yaw": view.yaw_deg, "pitch": view.pitch_deg,
                     "frames": ",".join(str(t) for t in picks)})
    path = _save(fig, pd.DataFrame(rows), out_dir, f"views_{source_id}")
    plt.close(fig)
    return path


def plot_recognition(table: pd.DataFrame, out_dir, name: str = "recognition") -> Path:
    """Render the per-view decoded-vs-reference table as a figure."""
    plt, _ = _pyplot()
    shown = table.copy()
    for column in shown.columns:
        if column.endswith("WER"):
            shown[column] = shown[column].map(lambda value: f"{value:.1f}")
    fig, ax = plt.subplots(figsize=(1.8 * len(shown.columns), 0.35 * (len(shown) + 2)))
    ax.axis("off")
    cells = ax.table(cellText=shown.to_numpy(), colLabels=list(shown.columns), loc="center", cellLoc="left")
    cells.auto_set_font_size(False)
    cells.set_fontsize(7)
    path = _save(fig, table, Path(out_dir), name)
    plt.close(fig)
    return path


def make_plots(ablation_dir, out_dir) -> list[Path]:
    """
    Plot every ablation table present in `ablation_dir`.

    Returns:
        Written PNG paths (tables that do not exist yet are skipped)
    """
    ablation_dir, out_dir = Path(ablation_dir), Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactIOError(out_dir, f"Cannot create plot directory ({e.strerror})") from e

    def table(name):
        path = ablation_dir / f"{name}.tsv"
        return pd.read_csv(path, sep="\t") if path.is_file() else None

    written = []
    if (frame := table("lambda")) is not None:
        written.append(plot_lambda(frame, out_dir))
    if (frame := table("modules")) is not None:
        written.append(plot_modules(frame, out_dir))
    if (frame := table("placement")) is not None:
        written.append(_bars(frame, "placement", out_dir, "placement", "WER (%)"))
    if (frame := table("anchor")) is not None:
        written.append(_bars(frame, "anchor", out_dir, "anchor", "test WER (%)"))
    if (frame := table("guidance_curves")) is not None:
        written.append(plot_guidance_curves(frame, out_dir))

    if not written:
        logger.warning("No ablation tables under %s; nothing to plot", ablation_dir)
    for path in written:
        logger.info("Wrote %s", path)
    return written


def make_example_plots(reports_dir, data_dir, out_dir, source_id: str | None = None) -> list[Path]:
    """
    Per-view qualitative figures.

    Renders every `<role>_<split>_examples.tsv` under `reports_dir` as a
    recognition table, and draws the view grid of `source_id` (default:
    the source of the first examples table, else the first test source)
    when a dataset exists in `data_dir`.

    Returns:
        Written PNG paths
    """
    reports_dir, data_dir, out_dir = Path(reports_dir), Path(data_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in sorted(reports_dir.glob(f"*{EXAMPLES_SUFFIX}")):
        table = pd.read_csv(path, sep="\t", keep_default_na=False)
        source_id = source_id or str(table["source"].iloc[0])
        name = "recognition_" + path.name[: -len(EXAMPLES_SUFFIX)]
        written.append(plot_recognition(table, out_dir, name))

    if (data_dir / MANIFEST_FILE).is_file():
        manifest = read_manifest(data_dir)
        if source_id is None:
            source_id = manifest.select("test")[0].source_id
        written.append(plot_view_grid(manifest, source_id, out_dir))
    else:
        logger.warning("No dataset under %s; skipping the view grid", data_dir)
    for path in written:
        logger.info("Wrote %s", path)
    return written
