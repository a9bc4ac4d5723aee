"""Tests for canonslr.manifest, canonslr.vocabulary and canonslr.data."""

import dataclasses

import numpy as np
import pytest
import torch

from canonslr.data import MultiViewDataset, make_loader, paired_sample
from canonslr.errors import DataIntegrityError, InvalidArgumentError
from canonslr.manifest import (
    DatasetManifest,
    ManifestEntry,
    read_frames,
    read_manifest,
    write_frames,
)
from canonslr.views import view_by_name
from canonslr.vocabulary import build_vocabulary, read_vocabulary, write_vocabulary


# --- vocabulary ------------------------------------------------------------

def test_two_gloss_vocabulary_puts_blank_last():
    vocab = build_vocabulary(2, seed=0)
    assert vocab.size == 2
    assert vocab.blank_index == 2
    assert vocab.num_classes == 3


def test_vocabulary_is_deterministic():
    assert build_vocabulary(20, seed=7) == build_vocabulary(20, seed=7)


def test_vocabulary_needs_two_glosses():
    with pytest.raises(InvalidArgumentError):
        build_vocabulary(1, seed=0)


def test_vocabulary_file_reads_back(tmp_path, tiny_vocab):
    path = tmp_path / "vocab.txt"
    write_vocabulary(tiny_vocab, path)
    assert read_vocabulary(path, primitive_seed=tiny_vocab.primitive_seed) == tiny_vocab


# --- frames ----------------------------------------------------------------

def test_frame_file_header_is_little_endian_u32_shape(tmp_path):
    frames = np.linspace(0.0, 1.0, 2 * 3 * 4 * 5, dtype=np.float32).reshape(2, 3, 4, 5)
    path = tmp_path / "f.bin"
    write_frames(path, frames)
    raw = path.read_bytes()
    assert np.frombuffer(raw[:16], dtype="<u4").tolist() == [2, 3, 4, 5]
    assert len(raw) == 16 + frames.size * 4
    assert np.array_equal(read_frames(path), frames)


def test_truncated_frame_file_is_rejected(tmp_path):
    path = tmp_path / "f.bin"
    write_frames(path, np.zeros((1, 3, 2, 2), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(DataIntegrityError):
        read_frames(path)


# --- manifest --------------------------------------------------------------

def test_manifest_record_has_six_tab_separated_fields():
    entry = ManifestEntry("S00001", "R45", "dev", 18, (2, 0), "frames/S00001_R45.bin")
    line = entry.to_line()
    assert line == "S00001\tR45\tdev\t18\t2,0\tframes/S00001_R45.bin"
    assert ManifestEntry.from_line(line) == entry


def test_manifest_reads_back_and_validates(tiny_dataset):
    again = read_manifest(tiny_dataset.root)
    assert again.entries == tiny_dataset.entries
    assert again.vocabulary == tiny_dataset.vocabulary
    assert again.config_hash == tiny_dataset.config_hash


def test_manifest_rejects_source_missing_a_view(tiny_dataset):
    entries = [e for e in tiny_dataset.entries if not (e.source_id == "S00000" and e.view == "U30")]
    broken = DatasetManifest(entries, tiny_dataset.vocabulary, tiny_dataset.config_hash, tiny_dataset.root)
    with pytest.raises(DataIntegrityError, match="missing views"):
        broken.validate()


def test_manifest_rejects_source_split_across_splits(tiny_dataset):
    entries = [
        dataclasses.replace(e, split="test") if (e.source_id == "S00000" and e.view == "R90") else e
        for e in tiny_dataset.entries
    ]
    broken = DatasetManifest(entries, tiny_dataset.vocabulary, tiny_dataset.config_hash, tiny_dataset.root)
    with pytest.raises(DataIntegrityError):
        broken.validate()


def test_manifest_rejects_duplicate_pairs(tiny_dataset):
    entries = list(tiny_dataset.entries) + [tiny_dataset.entries[0]]
    broken = DatasetManifest(entries, tiny_dataset.vocabulary, tiny_dataset.config_hash, tiny_dataset.root)
    with pytest.raises(DataIntegrityError, match="Duplicate"):
        broken.validate()


def test_splits_follow_source_counts(tiny_dataset):
    assert len(tiny_dataset.select("train")) == 2 * 7
    assert len(tiny_dataset.select("dev")) == 7
    assert len(tiny_dataset.select("test", views=["Front"])) == 1


# --- data ------------------------------------------------------------------

def test_paired_sample_shares_labels_and_length(tiny_dataset):
    entry = tiny_dataset.select("train", views=["L60"])[0]
    front = paired_sample(tiny_dataset, entry.source_id, "Front")
    assert front.view == view_by_name("Front")
    assert front.glosses == entry.glosses
    assert front.frames.shape[0] == entry.num_frames


def test_paired_sample_missing_view_is_data_integrity_error(tiny_dataset):
    entries = [e for e in tiny_dataset.entries if e.view != "Front"]
    manifest = DatasetManifest(entries, tiny_dataset.vocabulary, tiny_dataset.config_hash, tiny_dataset.root)
    with pytest.raises(DataIntegrityError):
        paired_sample(manifest, "S00000", "Front")


def test_loader_order_depends_only_on_seed(tiny_dataset):
    dataset = MultiViewDataset(tiny_dataset, "train")

    def order(seed):
        return [(s.source_id, s.view.name) for batch in make_loader(dataset, 3, seed) for s in batch]

    assert order(5) == order(5)
    assert sorted(order(5)) == sorted(order(6))


def test_dataset_samples_are_float_tensors(tiny_dataset):
    sample = MultiViewDataset(tiny_dataset, "dev", views=["D30"])[0]
    assert sample.frames.dtype == torch.float32
    assert sample.frames.shape[1:] == (3, 16, 16)
    assert sample.split == "dev"
