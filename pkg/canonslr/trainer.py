"""
Two-stage training and evaluation.

Stage I fits the teacher on anchor-view videos only. Stage II freezes it
and fits the multi-view student with

    conv CTC + sequence CTC + distill.weight * SSD

where SSD compares the student's sequence logits with the teacher's logits
on the paired anchor-view video (or on the student's own input when
`distill.teacher_input = own`).
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import pandas as pd
import torch
from torch.optim.lr_scheduler import MultiStepLR

from canonslr.backbone import Recognizer
from canonslr.checkpoint import Checkpoint, encode_entries, model_params, optimizer_arrays, save_checkpoint
from canonslr.ctc import beam_decode, ctc_loss
from canonslr.data import MultiViewDataset, VideoSample, load_sample, make_loader, paired_sample
from canonslr.errors import DataIntegrityError, InvalidArgumentError
from canonslr.logger import get_logger
from canonslr.manifest import DatasetManifest
from canonslr.metrics import build_report, edit_breakdown
from canonslr.settings import TrainConfig, config_hash
from canonslr.ssd import align_temporal, ssd_loss
from canonslr.views import VIEW_NAMES

logger = get_logger(__name__)

TRAIN_LOG_FILE = "train_log.jsonl"


@dataclass
class EpochLog:
    """One line of the training log. `ssd` is already multiplied by the distillation weight."""

    epoch: int
    conv_ctc: float
    seq_ctc: float
    ssd: float
    total: float
    dev_wer: float | None
    lr: float


@dataclass
class _SampleLoss:
    conv_ctc: torch.Tensor
    seq_ctc: torch.Tensor
    ssd: torch.Tensor


def seed_everything(seed: int) -> None:
    """Seed torch and ask for deterministic kernels."""
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)


def build_recognizer(num_classes: int, cfg: TrainConfig, role: str) -> Recognizer:
    """Teacher runs without TME; the student inserts it at `cfg.tme_stages`."""
    stages = () if role == "teacher" else cfg.tme_stages
    return Recognizer(num_classes, tme_stages=stages, tme_top_k=cfg.tme_k)


def decode_samples(model: Recognizer, samples, beam_width: int) -> list[tuple[str, tuple, list]]:
    """Beam-decode every sample; returns (view name, reference, hypothesis) triples."""
    was_training = model.training
    model.eval()
    results = []
    with torch.no_grad():
        for sample in samples:
            logits = model(sample.frames).seq_logits
            results.append((sample.view.name, sample.glosses, beam_decode(logits, beam_width)))
    model.train(was_training)
    return results


def _dev_wer(model: Recognizer, dev_set: MultiViewDataset, beam_width: int) -> float | None:
    if len(dev_set) == 0:
        return None
    results = decode_samples(model, (dev_set[i] for i in range(len(dev_set))), beam_width)
    report = build_report(results)
    return float(report.loc[report["name"] == "All", "WER"].iloc[0])


def _ctc_terms(model: Recognizer, sample: VideoSample):
    output = model(sample.frames)
    return output, ctc_loss(output.conv_logits, sample.glosses), ctc_loss(output.seq_logits, sample.glosses)


def _fit(model: Recognizer, train_set: MultiViewDataset, dev_set: MultiViewDataset, cfg: TrainConfig,
         sample_loss, out_dir: Path | None, role: str):
    """Shared epoch loop of both stages. Returns (optimizer, history)."""
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    scheduler = MultiStepLR(optimizer, milestones=list(cfg.lr_milestones), gamma=cfg.lr_decay)
    loader = make_loader(train_set, cfg.batch_size, cfg.seed)

    log_file = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_file = (out_dir / TRAIN_LOG_FILE).open("w", encoding="utf-8")

    history = []
    try:
        for epoch in range(1, cfg.epochs + 1):
            model.train()
            lr = optimizer.param_groups[0]["lr"]
            sums = {"conv_ctc": 0.0, "seq_ctc": 0.0, "ssd": 0.0, "total": 0.0}
            seen = 0
            for batch in loader:
                optimizer.zero_grad()
                terms = [sample_loss(model, sample) for sample in batch]
                conv = torch.stack([t.conv_ctc for t in terms]).mean()
                seq = torch.stack([t.seq_ctc for t in terms]).mean()
                ssd = torch.stack([t.ssd for t in terms]).mean()
                total = conv + seq + ssd
                total.backward()
                optimizer.step()

                n = len(batch)
                sums["conv_ctc"] += conv.item() * n
                sums["seq_ctc"] += seq.item() * n
                sums["ssd"] += ssd.item() * n
                sums["total"] += total.item() * n
                seen += n
            scheduler.step()

            record = EpochLog(
                epoch=epoch,
                conv_ctc=sums["conv_ctc"] / seen,
                seq_ctc=sums["seq_ctc"] / seen,
                ssd=sums["ssd"] / seen,
                total=sums["total"] / seen,
                dev_wer=_dev_wer(model, dev_set, cfg.beam_width),
                lr=lr,
            )
            history.append(asdict(record))
            if log_file is not None:
                log_file.write(json.dumps(asdict(record), sort_keys=True) + "\n")
                log_file.flush()
            logger.info(
                "%s epoch %d/%d: conv_ctc=%.4f seq_ctc=%.4f ssd=%.4f total=%.4f dev_wer=%s",
                role, epoch, cfg.epochs, record.conv_ctc, record.seq_ctc, record.ssd, record.total,
                "n/a" if record.dev_wer is None else f"{record.dev_wer:.2f}",
            )
    finally:
        if log_file is not None:
            log_file.close()
    return optimizer, history


def _package(model: Recognizer, optimizer, history, cfg: TrainConfig, role: str, out_dir: Path | None) -> Checkpoint:
    optimizer_state, param_groups = optimizer_arrays(optimizer)
    checkpoint = Checkpoint(
        role=role,
        epoch=cfg.epochs,
        config_hash=config_hash(cfg),
        num_classes=model.num_classes,
        tme_stages=model.tme_stages,
        tme_k=cfg.tme_k,
        params=model_params(model),
        optimizer_state=optimizer_state,
        param_groups=param_groups,
        history=history,
    )
    if out_dir is not None:
        save_checkpoint(checkpoint, out_dir)
        logger.info("Saved %s checkpoint to %s", role, out_dir)
    return checkpoint


def train_teacher(manifest: DatasetManifest, cfg: TrainConfig, out_dir=None) -> Checkpoint:
    """
    Stage I: fit the recognizer (no TME) on anchor-view training videos.

    Args:
        manifest: Dataset to train on
        cfg: Training settings; `cfg.distill.frontal_view` picks the anchor view
        out_dir: Optional directory for the checkpoint and train_log.jsonl

    Returns:
        Teacher Checkpoint

    Raises:
        InvalidArgumentError: The anchor view has no training samples
    """
    anchor = cfg.distill.frontal_view
    train_set = MultiViewDataset(manifest, "train", views=[anchor])
    if len(train_set) == 0:
        raise InvalidArgumentError(f"No {anchor} training samples to fit the teacher on")
    dev_set = MultiViewDataset(manifest, "dev", views=[anchor])
    out_dir = Path(out_dir) if out_dir is not None else None

    seed_everything(cfg.seed)
    model = build_recognizer(manifest.vocabulary.num_classes, cfg, "teacher")
    logger.info("Training teacher on %d %s samples for %d epochs", len(train_set), anchor, cfg.epochs)

    def sample_loss(net, sample):
        _, conv, seq = _ctc_terms(net, sample)
        return _SampleLoss(conv, seq, conv.new_zeros(()))

    optimizer, history = _fit(model, train_set, dev_set, cfg, sample_loss, out_dir, "teacher")
    return _package(model, optimizer, history, cfg, "teacher", out_dir)


class FrozenTeacher:
    """Read-only teacher with per-input caching of its sequence logits."""

    def __init__(self, checkpoint: Checkpoint, manifest: DatasetManifest, anchor: str, teacher_input: str):
        self.model = checkpoint.build_model()
        self.model.eval()
        self.model.requires_grad_(False)
        self.manifest = manifest
        self.anchor = anchor
        self.teacher_input = teacher_input
        self._cache = {}
        self._fingerprint = encode_entries(model_params(self.model))

    def logits(self, sample: VideoSample) -> torch.Tensor:
        if self.teacher_input == "paired":
            key = sample.source_id
        else:
            key = (sample.source_id, sample.view.name)
        if key not in self._cache:
            source = paired_sample(self.manifest, sample.source_id, self.anchor) if self.teacher_input == "paired" else sample
            with torch.no_grad():
                self._cache[key] = self.model(source.frames).seq_logits
        return self._cache[key]

    def assert_unchanged(self) -> None:
        if encode_entries(model_params(self.model)) != self._fingerprint:
            raise DataIntegrityError("Teacher parameters changed during student training")


def train_student(manifest: DatasetManifest, teacher: Checkpoint | None, cfg: TrainConfig, out_dir=None) -> Checkpoint:
    """
    Stage II: fit the multi-view student against the frozen teacher.

    With `cfg.distill.weight == 0` the teacher is never queried and may be
    None; the run then equals a plain multi-view baseline.

    Args:
        manifest: Dataset to train on (all views)
        teacher: Stage I checkpoint (role "teacher")
        cfg: Training settings
        out_dir: Optional directory for the checkpoint and train_log.jsonl

    Returns:
        Student Checkpoint

    Raises:
        InvalidArgumentError: Wrong checkpoint role, or no teacher while distillation is on
        DataIntegrityError: A training source lacks its anchor-view sample, or the
            teacher does not fit the vocabulary
    """
    distill = cfg.distill
    use_ssd = distill.weight > 0
    if use_ssd and teacher is None:
        raise InvalidArgumentError("A teacher checkpoint is required when distill.weight > 0")
    if teacher is not None and teacher.role != "teacher":
        raise InvalidArgumentError(f"Expected a teacher checkpoint, got role {teacher.role!r}")
    if teacher is not None and teacher.num_classes != manifest.vocabulary.num_classes:
        raise DataIntegrityError(
            f"Teacher has {teacher.num_classes} classes, vocabulary needs {manifest.vocabulary.num_classes}"
        )

    train_set = MultiViewDataset(manifest, "train")
    if len(train_set) == 0:
        raise InvalidArgumentError("No training samples")
    if use_ssd and distill.teacher_input == "paired":
        for source_id in sorted({entry.source_id for entry in train_set.entries}):
            manifest.lookup(source_id, distill.frontal_view)
    dev_set = MultiViewDataset(manifest, "dev")
    out_dir = Path(out_dir) if out_dir is not None else None

    frozen = FrozenTeacher(teacher, manifest, distill.frontal_view, distill.teacher_input) if use_ssd else None

    seed_everything(cfg.seed)
    model = build_recognizer(manifest.vocabulary.num_classes, cfg, "student")
    logger.info(
        "Training student on %d samples for %d epochs (tme_stages=%s, distill.weight=%s, teacher_input=%s)",
        len(train_set), cfg.epochs, list(cfg.tme_stages), distill.weight, distill.teacher_input,
    )

    def sample_loss(net, sample):
        output, conv, seq = _ctc_terms(net, sample)
        if frozen is None:
            return _SampleLoss(conv, seq, conv.new_zeros(()))
        target = align_temporal(frozen.logits(sample), output.seq_logits.shape[0])
        ssd = ssd_loss(target, output.seq_logits, sample.view, distill)
        return _SampleLoss(conv, seq, distill.weight * ssd)

    optimizer, history = _fit(model, train_set, dev_set, cfg, sample_loss, out_dir, "student")
    if frozen is not None:
        frozen.assert_unchanged()
    return _package(model, optimizer, history, cfg, "student", out_dir)


def evaluate(checkpoint: Checkpoint, manifest: DatasetManifest, split: str, beam_width: int, views=None):
    """
    Beam-decode every sample of `split` and build the per-view WER report.

    Returns:
        DataFrame as produced by `metrics.build_report`

    Raises:
        InvalidArgumentError: The split (restricted to `views`) is empty
    """
    entries = manifest.select(split, views)
    if not entries:
        raise InvalidArgumentError(f"Split {split!r} has no samples to evaluate")
    model = checkpoint.build_model()
    samples = (load_sample(manifest, entry) for entry in entries)
    results = decode_samples(model, samples, beam_width)
    logger.info("Decoded %d %s samples with the %s checkpoint", len(results), split, checkpoint.role)
    return build_report(results)


def recognition_examples(checkpoints: dict, manifest: DatasetManifest, source_id: str, beam_width: int) -> pd.DataFrame:
    """
    Decode all seven views of one source with every checkpoint given.

    Args:
        checkpoints: Role name -> Checkpoint, e.g. {"teacher": ..., "student": ...}
        source_id: Source whose renderings are decoded

    Returns:
        One row per view in VIEW_NAMES order: "source", "view", "reference", then a
        "<role>" hypothesis column and a "<role> WER" column (percent) per
        checkpoint. Glosses are written by name, space separated.
    """
    if not checkpoints:
        raise InvalidArgumentError("recognition_examples needs at least one checkpoint")
    samples = [paired_sample(manifest, source_id, view) for view in VIEW_NAMES]
    vocab = manifest.vocabulary
    table = pd.DataFrame({
        "source": source_id,
        "view": [sample.view.name for sample in samples],
        "reference": [" ".join(vocab.names(sample.glosses)) for sample in samples],
    })
    for role, checkpoint in checkpoints.items():
        results = decode_samples(checkpoint.build_model(), samples, beam_width)
        table[role] = [" ".join(vocab.names(hypothesis)) for _, _, hypothesis in results]
        table[f"{role} WER"] = [100.0 * edit_breakdown(reference, hypothesis).wer for _, reference, hypothesis in results]
    logger.info("Decoded %s under %d views with %s", source_id, len(samples), ", ".join(checkpoints))
    return table
