"""
Gloss vocabulary: the label space shared by data generation, CTC and decoding.
"""

from dataclasses import dataclass
from pathlib import Path

from canonslr.errors import ArtifactIOError, DataIntegrityError, InvalidArgumentError


@dataclass(frozen=True)
class GlossVocabulary:
    """
    Ordered gloss identifiers plus the CTC blank.

    The blank takes the class index right after the last gloss, so a
    recognizer over this vocabulary has `size + 1` output classes.
    `primitive_seed` selects the motion primitive of every gloss.
    """

    glosses: tuple[str, ...]
    primitive_seed: int

    def __post_init__(self):
        if len(self.glosses) < 2:
            raise InvalidArgumentError("A vocabulary needs at least 2 glosses")
        if len(set(self.glosses)) != len(self.glosses):
            raise InvalidArgumentError("Gloss identifiers must be unique")

    @property
    def size(self) -> int:
        return len(self.glosses)

    @property
    def blank_index(self) -> int:
        return len(self.glosses)

    @property
    def num_classes(self) -> int:
        return len(self.glosses) + 1

    def names(self, indices) -> list[str]:
        return [self.glosses[i] for i in indices]


def build_vocabulary(size: int, seed: int) -> GlossVocabulary:
    """
    Build a vocabulary of `size` glosses.

    Args:
        size: Number of glosses (>= 2)
        seed: Seed from which every gloss's motion primitive is derived

    Returns:
        GlossVocabulary with blank_index == size
    """
    if size < 2:
        raise InvalidArgumentError(f"Vocabulary size must be >= 2, got {size}")
    glosses = tuple(f"GLOSS{i:03d}" for i in range(size))
    return GlossVocabulary(glosses=glosses, primitive_seed=int(seed))


def write_vocabulary(vocab: GlossVocabulary, path) -> None:
    """Write one `index<TAB>gloss` line per gloss."""
    lines = [f"{i}\t{gloss}\n" for i, gloss in enumerate(vocab.glosses)]
    try:
        Path(path).write_text("".join(lines), encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(path, f"Failed to write vocabulary ({e.strerror})") from e


def read_vocabulary(path, primitive_seed: int) -> GlossVocabulary:
    """Read a vocabulary written by `write_vocabulary`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(path, f"Failed to read vocabulary ({e.strerror})") from e

    glosses = []
    for expected, line in enumerate(text.splitlines()):
        index, _, gloss = line.partition("\t")
        if index != str(expected) or not gloss:
            raise DataIntegrityError(f"{path}: malformed vocabulary line {line!r}")
        glosses.append(gloss)
    return GlossVocabulary(glosses=tuple(glosses), primitive_seed=primitive_seed)
