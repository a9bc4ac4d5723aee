"""
Reading generated samples back for training and evaluation.
"""

from dataclasses import dataclass

import torch
from torch.utils.data import DataLoader, Dataset

from canonslr.manifest import DatasetManifest, ManifestEntry, read_frames
from canonslr.views import ViewAngle, view_by_name


@dataclass
class VideoSample:
    """One view of one source sequence: frames [T, 3, H, W] plus its labels."""

    frames: torch.Tensor
    view: ViewAngle
    glosses: tuple[int, ...]
    source_id: str
    split: str


def load_sample(manifest: DatasetManifest, entry: ManifestEntry) -> VideoSample:
    frames = torch.from_numpy(read_frames(manifest.frame_file(entry)))
    return VideoSample(
        frames=frames,
        view=view_by_name(entry.view),
        glosses=entry.glosses,
        source_id=entry.source_id,
        split=entry.split,
    )


def paired_sample(manifest: DatasetManifest, source_id: str, view: str) -> VideoSample:
    """The `view` rendering of `source_id`; DataIntegrityError if it was never generated."""
    return load_sample(manifest, manifest.lookup(source_id, view))


class MultiViewDataset(Dataset):
    """Samples of one split, optionally restricted to a subset of views.

    Frames are read from disk on access; nothing is cached.
    """

    def __init__(self, manifest: DatasetManifest, split: str, views=None):
        self.manifest = manifest
        self.entries = manifest.select(split, views)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, index) -> VideoSample:
        return load_sample(self.manifest, self.entries[index])


def _as_list(batch):
    return list(batch)


def make_loader(dataset: Dataset, batch_size: int, seed: int, shuffle: bool = True) -> DataLoader:
    """
    Deterministic loader yielding lists of VideoSample.

    Samples differ in length, so batches are plain lists and the model
    forwards them one at a time. The shuffle order depends only on `seed`
    and the epoch count of the loader.
    """
    generator = torch.Generator()
    generator.manual_seed(seed)
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        generator=generator,
        collate_fn=_as_list,
        num_workers=0,
    )
