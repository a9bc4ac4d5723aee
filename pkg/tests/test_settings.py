"""Tests for canonslr.settings: config file parsing, overrides and hashing."""

import pytest

from canonslr.errors import ConfigError
from canonslr.settings import (
    DistillConfig,
    GenerationConfig,
    TrainConfig,
    config_hash,
    flatten,
    load_settings,
    parse_config_text,
)


def test_defaults_match_the_desk_run():
    train = TrainConfig()
    assert train.epochs == 40
    assert train.learning_rate == pytest.approx(1e-4)
    assert train.lr_milestones == (25, 35)
    assert train.tme_stages == (3, 4)
    assert train.beam_width == 10
    assert train.distill == DistillConfig(temperature=8.0, weight=40.0, frontal_view="Front", teacher_input="paired")


def test_comments_and_blank_lines_are_ignored():
    values = parse_config_text("# header\n\nepochs = 3  # inline\n  distill.weight=5\n")
    assert values == {"epochs": "3", "distill.weight": "5"}


def test_config_file_then_overrides_then_seed(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("epochs = 3\ntme_stages = 3\ndata.vocab_size = 5\nseed = 1\n", encoding="utf-8")
    settings = load_settings(path, overrides=["epochs=7", "distill.temperature=2"], seed=9)
    assert settings.train.epochs == 7
    assert settings.train.tme_stages == (3,)
    assert settings.train.distill.temperature == 2.0
    assert settings.data.vocab_size == 5
    assert settings.data.seed == 9 and settings.train.seed == 9


@pytest.mark.parametrize("raw", ["", "none"])
def test_empty_tuple_disables_tme(raw):
    settings = load_settings(overrides=[f"tme_stages={raw}"])
    assert settings.train.tme_stages == ()


@pytest.mark.parametrize(
    "override",
    [
        "no_such_key=1",
        "epochs=many",
        "epochs=0",
        "tme_stages=2,3",
        "lr_milestones=30,20",
        "distill.temperature=0",
        "distill.weight=-1",
        "distill.frontal_view=R30",
        "distill.teacher_input=mirror",
        "data.height=20",
        "data.train_sources=0",
        "missing-equals",
    ],
)
def test_bad_settings_raise_config_error(override):
    with pytest.raises(ConfigError):
        load_settings(overrides=[override])


def test_missing_config_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_settings(tmp_path / "absent.cfg")


def test_config_error_is_a_value_error():
    with pytest.raises(ValueError):
        load_settings(overrides=["epochs=-3"])


def test_flatten_renders_nested_fields():
    flat = flatten(TrainConfig())
    assert flat["distill.weight"] == "40.0"
    assert flat["tme_stages"] == "3,4"
    assert list(flat) == sorted(flat)


def test_config_hash_is_stable_and_sensitive():
    assert config_hash(GenerationConfig()) == config_hash(GenerationConfig())
    assert len(config_hash(GenerationConfig())) == 16
    assert config_hash(GenerationConfig()) != config_hash(GenerationConfig(seed=1))


@pytest.mark.parametrize(
    "overrides",
    [
        # 2 glosses in 8 frames pool to 2 outputs; a repeated pair needs 3.
        ["data.frames_per_gloss=4", "data.transition_frames=0", "data.max_glosses=3"],
        ["data.frames_per_gloss=3", "data.transition_frames=0", "data.max_glosses=3"],
        # A single gloss in 3 frames is below the recognizer's minimum input.
        ["data.frames_per_gloss=3", "data.min_glosses=1"],
    ],
)
def test_sequences_too_short_for_ctc_are_rejected(overrides):
    with pytest.raises(ConfigError, match="gloss sequences have"):
        load_settings(overrides=overrides)


def test_every_sequence_length_is_checked():
    data = GenerationConfig(min_glosses=1, max_glosses=2, frames_per_gloss=8, transition_frames=2)
    assert [data.sequence_frames(n) for n in (1, 2)] == [8, 18]
    with pytest.raises(ConfigError, match="2-gloss"):
        GenerationConfig(min_glosses=1, max_glosses=2, frames_per_gloss=5, transition_frames=0)
