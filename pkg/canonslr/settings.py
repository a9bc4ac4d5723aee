"""
Run configuration: the dataclasses every command is driven by, and the
flat key=value config file they are loaded from.

File format, one setting per line:

    # comment
    epochs = 40
    tme_stages = 3,4
    distill.weight = 40.0
    data.vocab_size = 20
    seed = 0

Training keys are the `TrainConfig` field names, `distill.<field>` fills the
nested `DistillConfig`, `data.<field>` fills `GenerationConfig`, and `seed`
is shared by generation and training. `--set key=value` overrides are
applied after the file is parsed.
"""

import dataclasses
import hashlib
import typing
from dataclasses import dataclass, field
from pathlib import Path

from canonslr.errors import ConfigError
from canonslr.views import VIEW_NAMES

TEACHER_INPUTS = ("paired", "own")
TME_STAGE_CHOICES = (3, 4)
# Frames per output step of the recognizer's temporal head.
TEMPORAL_STRIDE = 4


@dataclass(frozen=True)
class GenerationConfig:
    """Parameters of the synthetic multi-view dataset."""

    vocab_size: int = 20
    train_sources: int = 80
    dev_sources: int = 10
    test_sources: int = 10
    min_glosses: int = 2
    max_glosses: int = 4
    frames_per_gloss: int = 8
    transition_frames: int = 2
    height: int = 64
    width: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ConfigError(f"data.vocab_size must be >= 2, got {self.vocab_size}")
        if min(self.train_sources, self.dev_sources, self.test_sources) < 1:
            raise ConfigError("data.*_sources must all be >= 1")
        if not 1 <= self.min_glosses <= self.max_glosses:
            raise ConfigError("data.min_glosses must be in [1, data.max_glosses]")
        if self.frames_per_gloss < 1 or self.transition_frames < 0:
            raise ConfigError("data.frames_per_gloss must be >= 1 and data.transition_frames >= 0")
        if self.height < 16 or self.width < 16 or self.height % 16 or self.width % 16:
            raise ConfigError("data.height and data.width must be multiples of 16")
        for length in range(self.min_glosses, self.max_glosses + 1):
            frames = self.sequence_frames(length)
            if frames < 4:
                raise ConfigError(f"{length}-gloss sequences have {frames} frames; the recognizer needs at least 4")
            # Adjacent glosses may repeat, so a CTC path can need 2 * length - 1 outputs.
            if frames // TEMPORAL_STRIDE < 2 * length - 1:
                raise ConfigError(
                    f"{length}-gloss sequences have {frames} frames, {frames // TEMPORAL_STRIDE} outputs "
                    f"after temporal pooling; CTC can need {2 * length - 1}. "
                    "Raise data.frames_per_gloss or data.transition_frames"
                )

    def sequence_frames(self, num_glosses: int) -> int:
        """Frame count T of a rendered sequence with `num_glosses` glosses."""
        return num_glosses * self.frames_per_gloss + (num_glosses - 1) * self.transition_frames


@dataclass(frozen=True)
class DistillConfig:
    """Sequence-level soft-target distillation settings.

    `frontal_view` names the canonical anchor: the view the teacher is trained
    on and the one view distillation is switched off for. `teacher_input`
    selects whether the teacher sees the paired anchor-view sample or the
    student's own input.
    """

    temperature: float = 8.0
    weight: float = 40.0
    frontal_view: str = "Front"
    teacher_input: str = "paired"

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError(f"distill.temperature must be > 0, got {self.temperature}")
        if not self.weight >= 0:
            raise ConfigError(f"distill.weight must be >= 0, got {self.weight}")
        if self.frontal_view not in VIEW_NAMES:
            raise ConfigError(f"distill.frontal_view must be one of {VIEW_NAMES}")
        if self.teacher_input not in TEACHER_INPUTS:
            raise ConfigError(f"distill.teacher_input must be one of {TEACHER_INPUTS}")


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation, architecture switches and decoding for both stages."""

    epochs: int = 40
    learning_rate: float = 1e-4
    lr_milestones: tuple[int, ...] = (25, 35)
    lr_decay: float = 0.2
    batch_size: int = 8
    seed: int = 0
    distill: DistillConfig = field(default_factory=DistillConfig)
    tme_stages: tuple[int, ...] = (3, 4)
    tme_k: int = 4
    beam_width: int = 10
    checkpoint_dir: str = "checkpoints"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if any(b <= a for a, b in zip(self.lr_milestones, self.lr_milestones[1:])):
            raise ConfigError(f"lr_milestones must be strictly increasing, got {self.lr_milestones}")
        if not set(self.tme_stages) <= set(TME_STAGE_CHOICES):
            raise ConfigError(f"tme_stages must be a subset of {TME_STAGE_CHOICES}, got {self.tme_stages}")
        if self.batch_size < 1 or self.tme_k < 1 or self.beam_width < 1:
            raise ConfigError("batch_size, tme_k and beam_width must be >= 1")


@dataclass(frozen=True)
class Settings:
    """Everything one command needs."""

    data: GenerationConfig = field(default_factory=GenerationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into a dict of raw strings."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = value
    return values


def parse_override(item: str) -> tuple[str, str]:
    """Split one `--set key=value` argument."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, value = item.split("=", 1)
    return key.strip(), value.strip()


def _coerce(key: str, value: str, hint):
    """Convert a raw string to the dataclass field type."""
    try:
        if hint is bool:
            lowered = value.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if hint is int:
            return int(value)
        if hint is float:
            return float(value)
        if hint is str:
            return value
        if typing.get_origin(hint) is tuple:
            if value.lower() in ("", "none"):
                return ()
            return tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError as e:
        raise ConfigError(f"{key}: cannot parse {value!r}") from e
    raise ConfigError(f"{key}: unsupported field type {hint!r}")


def _field_table() -> dict:
    """Map every accepted key to (section, field name, type hint)."""
    table = {"seed": ("seed", "seed", int)}
    for name, hint in typing.get_type_hints(GenerationConfig).items():
        if name != "seed":
            table[f"data.{name}"] = ("data", name, hint)
    for name, hint in typing.get_type_hints(TrainConfig).items():
        if name not in ("seed", "distill"):
            table[name] = ("train", name, hint)
    for name, hint in typing.get_type_hints(DistillConfig).items():
        table[f"distill.{name}"] = ("distill", name, hint)
    return table


def build_settings(values: dict) -> Settings:
    """Build `Settings` from raw key/value strings; unknown keys are rejected."""
    table = _field_table()
    unknown = sorted(set(values) - set(table))
    if unknown:
        raise ConfigError(f"Unknown config key(s): {', '.join(unknown)}")

    sections = {"data": {}, "train": {}, "distill": {}}
    for key, raw in values.items():
        section, name, hint = table[key]
        parsed = _coerce(key, raw, hint)
        if section == "seed":
            sections["data"]["seed"] = parsed
            sections["train"]["seed"] = parsed
        else:
            sections[section][name] = parsed

    distill = DistillConfig(**sections["distill"])
    return Settings(
        data=GenerationConfig(**sections["data"]),
        train=TrainConfig(distill=distill, **sections["train"]),
    )


def load_settings(path=None, overrides=(), seed=None) -> Settings:
    """
    Load settings from an optional config file plus overrides.

    Args:
        path: Config file path, or None for the built-in defaults
        overrides: Iterable of `key=value` strings applied after the file
        seed: Optional seed applied last

    Returns:
        Settings
    """
    values = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError(f"Config file not found: {config_path}")
        values.update(parse_config_text(config_path.read_text(encoding="utf-8")))
    for item in overrides:
        key, value = parse_override(item)
        values[key] = value
    if seed is not None:
        values["seed"] = str(seed)
    return build_settings(values)


def flatten(obj, prefix: str = "") -> dict:
    """Render a (nested) config dataclass as sorted `key -> string` pairs."""
    flat = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(value):
            flat.update(flatten(value, prefix=f"{key}."))
        elif isinstance(value, tuple):
            flat[key] = ",".join(str(v) for v in value)
        else:
            flat[key] = repr(value) if isinstance(value, float) else str(value)
    return dict(sorted(flat.items()))


def config_hash(obj) -> str:
    """Stable short hash of a config dataclass."""
    rendered = "\n".join(f"{k}={v}" for k, v in flatten(obj).items())
    return hashlib.sha256(rendered.encode("utf-8")).hexdigest()[:16]
