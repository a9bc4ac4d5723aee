"""End-to-end tests for canonslr.trainer on the tiny generated dataset."""

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from canonslr.checkpoint import PARAMS_FILE, load_checkpoint
from canonslr.errors import DataIntegrityError, InvalidArgumentError
from canonslr.manifest import DatasetManifest
from canonslr.metrics import REPORT_COLUMNS
from canonslr.settings import DistillConfig, TrainConfig
from canonslr.trainer import TRAIN_LOG_FILE, evaluate, recognition_examples, train_student, train_teacher
from canonslr.views import VIEW_NAMES


def _config(weight=40.0, teacher_input="paired", **changes):
    base = TrainConfig(
        epochs=1,
        learning_rate=1e-3,
        lr_milestones=(),
        batch_size=4,
        seed=0,
        distill=DistillConfig(temperature=8.0, weight=weight, teacher_input=teacher_input),
        tme_stages=(3, 4),
        tme_k=2,
        beam_width=3,
    )
    return replace(base, **changes)


@pytest.fixture(scope="module")
def teacher(tiny_dataset):
    return train_teacher(tiny_dataset, _config())


def _params_equal(a, b):
    return list(a) == list(b) and all(np.array_equal(a[name], b[name]) for name in a)


def test_teacher_checkpoint_and_log(tiny_dataset, tmp_path):
    checkpoint = train_teacher(tiny_dataset, _config(), out_dir=tmp_path)
    assert checkpoint.role == "teacher"
    assert checkpoint.epoch == 1
    assert checkpoint.tme_stages == ()
    assert checkpoint.num_classes == tiny_dataset.vocabulary.num_classes

    lines = (tmp_path / TRAIN_LOG_FILE).read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    record = json.loads(lines[0])
    assert record["epoch"] == 1
    assert record["ssd"] == 0.0
    assert all(math.isfinite(record[k]) for k in ("conv_ctc", "seq_ctc", "total"))
    assert record["total"] == pytest.approx(record["conv_ctc"] + record["seq_ctc"] + record["ssd"], rel=1e-6)
    assert 0.0 <= record["dev_wer"]

    assert load_checkpoint(tmp_path).history == checkpoint.history


def test_teacher_training_is_deterministic_for_a_seed(tiny_dataset, tmp_path):
    cfg = _config(epochs=2)
    train_teacher(tiny_dataset, cfg, out_dir=tmp_path / "a")
    train_teacher(tiny_dataset, cfg, out_dir=tmp_path / "b")
    for name in (PARAMS_FILE, TRAIN_LOG_FILE):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_student_training_is_deterministic_for_a_seed(tiny_dataset, tmp_path):
    cfg = _config(weight=0.0)
    train_student(tiny_dataset, None, cfg, out_dir=tmp_path / "a")
    train_student(tiny_dataset, None, cfg, out_dir=tmp_path / "b")
    assert (tmp_path / "a" / PARAMS_FILE).read_bytes() == (tmp_path / "b" / PARAMS_FILE).read_bytes()
    assert (tmp_path / "a" / TRAIN_LOG_FILE).read_text() == (tmp_path / "b" / TRAIN_LOG_FILE).read_text()


def test_student_leaves_the_teacher_untouched(tiny_dataset, teacher):
    before = {name: array.copy() for name, array in teacher.params.items()}
    student = train_student(tiny_dataset, teacher, _config())
    assert _params_equal(before, teacher.params)
    assert student.role == "student"
    assert student.tme_stages == (3, 4)
    record = student.history[0]
    assert record["ssd"] > 0.0
    assert record["total"] == pytest.approx(record["conv_ctc"] + record["seq_ctc"] + record["ssd"], rel=1e-6)


def test_zero_weight_equals_the_baseline_without_a_teacher(tiny_dataset, teacher):
    with_teacher = train_student(tiny_dataset, teacher, _config(weight=0.0))
    without = train_student(tiny_dataset, None, _config(weight=0.0))
    assert with_teacher.history == without.history
    assert _params_equal(with_teacher.params, without.params)


def test_own_input_guidance_trains(tiny_dataset, teacher):
    student = train_student(tiny_dataset, teacher, _config(teacher_input="own"))
    assert student.history[0]["ssd"] > 0.0


def test_distillation_needs_a_teacher(tiny_dataset):
    with pytest.raises(InvalidArgumentError):
        train_student(tiny_dataset, None, _config())


def test_student_checkpoint_is_not_a_teacher(tiny_dataset):
    student = train_student(tiny_dataset, None, _config(weight=0.0))
    with pytest.raises(InvalidArgumentError):
        train_student(tiny_dataset, student, _config())


def test_missing_anchor_view_is_a_data_integrity_error(tiny_dataset, teacher):
    entries = [e for e in tiny_dataset.entries if not (e.split == "train" and e.view == "Front" and e.source_id == "S00001")]
    damaged = DatasetManifest(entries, tiny_dataset.vocabulary, tiny_dataset.config_hash, tiny_dataset.root)
    with pytest.raises(DataIntegrityError, match="S00001"):
        train_student(damaged, teacher, _config())


def test_teacher_needs_anchor_training_samples(tiny_dataset):
    entries = [e for e in tiny_dataset.entries if not (e.split == "train" and e.view == "L60")]
    damaged = DatasetManifest(entries, tiny_dataset.vocabulary, tiny_dataset.config_hash, tiny_dataset.root)
    cfg = _config(distill=DistillConfig(frontal_view="L60"))
    with pytest.raises(InvalidArgumentError):
        train_teacher(damaged, cfg)


def test_evaluate_reports_every_view(tiny_dataset, teacher):
    report = evaluate(teacher, tiny_dataset, "test", beam_width=3)
    assert list(report.columns) == REPORT_COLUMNS
    assert len(report) == 7 + 4 + 1
    assert report["n_samples"].iloc[-1] == 7
    assert (report["WER"] >= 0.0).all()


def test_evaluate_rejects_an_empty_selection(tiny_dataset, teacher):
    with pytest.raises(InvalidArgumentError):
        evaluate(teacher, tiny_dataset, "test", beam_width=3, views=[])


def test_recognition_examples_list_every_view_of_one_source(tiny_dataset, teacher):
    source_id = tiny_dataset.select("test")[0].source_id
    table = recognition_examples({"teacher": teacher}, tiny_dataset, source_id, beam_width=3)
    assert list(table.columns) == ["source", "view", "reference", "teacher", "teacher WER"]
    assert set(table["source"]) == {source_id}
    assert table["view"].tolist() == list(VIEW_NAMES)
    glosses = tiny_dataset.lookup(source_id, "Front").glosses
    assert set(table["reference"]) == {" ".join(tiny_dataset.vocabulary.names(glosses))}
    assert (table["teacher WER"] >= 0.0).all()
    report = evaluate(teacher, tiny_dataset, "test", beam_width=3)
    front_wer = report.loc[report["name"] == "Front", "WER"].item()
    assert table.loc[table["view"] == "Front", "teacher WER"].item() == pytest.approx(front_wer)


def test_recognition_examples_need_a_checkpoint(tiny_dataset):
    with pytest.raises(InvalidArgumentError):
        recognition_examples({}, tiny_dataset, "S00003", beam_width=3)
