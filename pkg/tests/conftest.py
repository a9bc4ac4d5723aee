"""Shared pytest fixtures for the canonslr test suite."""

import os
import sys

import pytest

# Make the project root importable so `from canonslr import ...` works
# regardless of where pytest is invoked from.
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from canonslr.settings import DistillConfig, GenerationConfig, TrainConfig  # noqa: E402
from canonslr.vocabulary import build_vocabulary  # noqa: E402


@pytest.fixture
def tiny_vocab():
    """Three glosses plus the blank at index 3."""
    return build_vocabulary(3, seed=0)


@pytest.fixture(scope="session")
def tiny_generation():
    """4 sources x 7 views of 16x16 frames, 1-2 glosses each (T = 8 or 18)."""
    return GenerationConfig(
        vocab_size=3,
        train_sources=2,
        dev_sources=1,
        test_sources=1,
        min_glosses=1,
        max_glosses=2,
        frames_per_gloss=8,
        transition_frames=2,
        height=16,
        width=16,
        seed=0,
    )


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory, tiny_generation):
    """A generated tiny dataset, shared by the whole session (read-only)."""
    from canonslr.synthviews import generate_dataset

    return generate_dataset(tiny_generation, tmp_path_factory.mktemp("tiny_data"))


@pytest.fixture
def tiny_train_config():
    """One epoch, small batches, TME at both stages, distillation on."""
    return TrainConfig(
        epochs=1,
        learning_rate=1e-3,
        lr_milestones=(),
        batch_size=4,
        seed=0,
        distill=DistillConfig(temperature=8.0, weight=40.0),
        tme_stages=(3, 4),
        tme_k=2,
        beam_width=3,
    )
