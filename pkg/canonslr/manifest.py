"""
On-disk dataset layout: the manifest index and the binary frame files.

A dataset directory holds

    manifest.txt       one tab-separated record per sample:
                       source_id, view, split, T, gloss_ids, frame_path
    vocab.txt          index<TAB>gloss per line
    generation.json    generation config and its hash
    frames/*.bin       [u32 T][u32 C][u32 H][u32 W] + float32 payload,
                       all little-endian, row-major
"""

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from canonslr.errors import ArtifactIOError, DataIntegrityError, InvalidArgumentError
from canonslr.views import VIEW_NAMES
from canonslr.vocabulary import GlossVocabulary, read_vocabulary, write_vocabulary

MANIFEST_FILE = "manifest.txt"
VOCAB_FILE = "vocab.txt"
GENERATION_FILE = "generation.json"
FRAMES_DIR = "frames"
SPLITS = ("train", "dev", "test")

_HEADER_DTYPE = np.dtype("<u4")
_PAYLOAD_DTYPE = np.dtype("<f4")


@dataclass(frozen=True)
class ManifestEntry:
    """One rendered sample: a single view of one source sequence."""

    source_id: str
    view: str
    split: str
    num_frames: int
    glosses: tuple[int, ...]
    frame_path: str

    def to_line(self) -> str:
        gloss_ids = ",".join(str(g) for g in self.glosses)
        return "\t".join(
            [self.source_id, self.view, self.split, str(self.num_frames), gloss_ids, self.frame_path]
        )

    @classmethod
    def from_line(cls, line: str) -> "ManifestEntry":
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 6:
            raise DataIntegrityError(f"Manifest record has {len(fields)} fields, expected 6: {line!r}")
        source_id, view, split, num_frames, gloss_ids, frame_path = fields
        try:
            glosses = tuple(int(g) for g in gloss_ids.split(",") if g)
            return cls(source_id, view, split, int(num_frames), glosses, frame_path)
        except ValueError as e:
            raise DataIntegrityError(f"Malformed manifest record {line!r}") from e


@dataclass
class DatasetManifest:
    """Index of a generated dataset plus the vocabulary it was labelled with."""

    entries: list[ManifestEntry]
    vocabulary: GlossVocabulary
    config_hash: str
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        self._index = {(e.source_id, e.view): e for e in self.entries}

    def validate(self) -> None:
        """Check every manifest invariant; raise DataIntegrityError on the first failure."""
        if len(self._index) != len(self.entries):
            raise DataIntegrityError("Duplicate (source_id, view) pair in manifest")

        by_source = defaultdict(list)
        for entry in self.entries:
            if entry.view not in VIEW_NAMES:
                raise DataIntegrityError(f"{entry.source_id}: unknown view {entry.view!r}")
            if entry.split not in SPLITS:
                raise DataIntegrityError(f"{entry.source_id}: unknown split {entry.split!r}")
            if not entry.glosses:
                raise DataIntegrityError(f"{entry.source_id}/{entry.view}: empty gloss sequence")
            if any(not 0 <= g < self.vocabulary.size for g in entry.glosses):
                raise DataIntegrityError(f"{entry.source_id}/{entry.view}: gloss id out of range")
            by_source[entry.source_id].append(entry)

        for source_id, group in by_source.items():
            if {e.view for e in group} != set(VIEW_NAMES):
                missing = sorted(set(VIEW_NAMES) - {e.view for e in group})
                raise DataIntegrityError(f"{source_id}: missing views {missing}")
            if len({e.split for e in group}) != 1:
                raise DataIntegrityError(f"{source_id}: views assigned to more than one split")
            if len({e.glosses for e in group}) != 1 or len({e.num_frames for e in group}) != 1:
                raise DataIntegrityError(f"{source_id}: views disagree on glosses or frame count")

    def select(self, split: str, views=None) -> list[ManifestEntry]:
        """Entries of one split, optionally restricted to some views, in manifest order."""
        wanted = set(views) if views is not None else None
        return [e for e in self.entries if e.split == split and (wanted is None or e.view in wanted)]

    def lookup(self, source_id: str, view: str) -> ManifestEntry:
        """The entry for one view of a source; DataIntegrityError if it is absent."""
        try:
            return self._index[(source_id, view)]
        except KeyError:
            raise DataIntegrityError(f"No {view} sample for source {source_id}") from None

    def frame_file(self, entry: ManifestEntry) -> Path:
        return self.root / entry.frame_path


def write_frames(path, frames: np.ndarray) -> None:
    """Write a [T, C, H, W] frame array in the binary frame format."""
    if frames.ndim != 4:
        raise InvalidArgumentError(f"Expected frames of rank 4, got shape {frames.shape}")
    header = np.asarray(frames.shape, dtype=_HEADER_DTYPE).tobytes()
    payload = np.ascontiguousarray(frames, dtype=_PAYLOAD_DTYPE).tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as e:
        raise ArtifactIOError(path, f"Failed to write frames ({e.strerror})") from e


def read_frames(path) -> np.ndarray:
    """Read a frame file back as a float32 [T, C, H, W] array."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ArtifactIOError(path, f"Failed to read frames ({e.strerror})") from e

    header_size = 4 * _HEADER_DTYPE.itemsize
    if len(raw) < header_size:
        raise DataIntegrityError(f"{path}: truncated frame header")
    shape = tuple(int(d) for d in np.frombuffer(raw[:header_size], dtype=_HEADER_DTYPE))
    payload = np.frombuffer(raw[header_size:], dtype=_PAYLOAD_DTYPE)
    if payload.size != int(np.prod(shape)):
        raise DataIntegrityError(f"{path}: payload does not match header shape {shape}")
    return payload.reshape(shape).copy()


def write_manifest(manifest: DatasetManifest, directory, generation: dict) -> Path:
    """
    Write manifest.txt, vocab.txt and generation.json into `directory`.

    Args:
        manifest: Manifest to write (frame files must already exist)
        directory: Dataset directory
        generation: Generation config rendered as a flat dict

    Returns:
        Path to manifest.txt
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    lines = "".join(entry.to_line() + "\n" for entry in manifest.entries)
    meta = {
        "config": generation,
        "config_hash": manifest.config_hash,
        "primitive_seed": manifest.vocabulary.primitive_seed,
    }
    try:
        manifest_path.write_text(lines, encoding="utf-8")
        (directory / GENERATION_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(directory, f"Failed to write manifest ({e.strerror})") from e
    write_vocabulary(manifest.vocabulary, directory / VOCAB_FILE)
    return manifest_path


def read_manifest(directory) -> DatasetManifest:
    """Load and validate the dataset stored in `directory`."""
    directory = Path(directory)
    try:
        meta = json.loads((directory / GENERATION_FILE).read_text(encoding="utf-8"))
        lines = (directory / MANIFEST_FILE).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ArtifactIOError(directory, f"Failed to read dataset ({e.strerror})") from e
    except json.JSONDecodeError as e:
        raise DataIntegrityError(f"{directory / GENERATION_FILE}: invalid JSON") from e

    vocab = read_vocabulary(directory / VOCAB_FILE, primitive_seed=int(meta["primitive_seed"]))
    entries = [ManifestEntry.from_line(line) for line in lines if line.strip()]
    manifest = DatasetManifest(entries=entries, vocabulary=vocab, config_hash=meta["config_hash"], root=directory)
    manifest.validate()
    return manifest
