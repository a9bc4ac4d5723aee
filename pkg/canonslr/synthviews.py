"""
Synthetic multi-view sign sequences.

A source sequence is a pelvis-centred 3D skeleton composed from per-gloss
hand trajectories. Each of the seven views is the same skeleton under one
global rigid rotation, rasterised to small RGB frames, so all views of a
source share glosses and frame count by construction.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from canonslr.errors import ArtifactIOError, InvalidArgumentError
from canonslr.logger import get_logger
from canonslr.manifest import FRAMES_DIR, SPLITS, DatasetManifest, ManifestEntry, write_frames, write_manifest
from canonslr.settings import GenerationConfig, config_hash, flatten
from canonslr.views import VIEW_ANGLES
from canonslr.vocabulary import GlossVocabulary, build_vocabulary

logger = get_logger(__name__)

# Joint layout (J = 11).
PELVIS, SPINE, HEAD = 0, 1, 2
L_SHOULDER, R_SHOULDER = 3, 4
L_ELBOW, R_ELBOW = 5, 6
L_WRIST, R_WRIST = 7, 8
L_HAND, R_HAND = 9, 10
NUM_JOINTS = 11

# x to the signer's right, y up, z towards the camera.
REST_POSE = np.array(
    [
        [0.0, 0.0, 0.0],
        [0.0, 0.30, 0.0],
        [0.0, 0.62, 0.02],
        [-0.18, 0.48, 0.0],
        [0.18, 0.48, 0.0],
        [-0.24, 0.30, 0.04],
        [0.24, 0.30, 0.04],
        [-0.24, 0.20, 0.12],
        [0.24, 0.20, 0.12],
        [-0.25, 0.22, 0.18],
        [0.25, 0.22, 0.18],
    ]
)

# Colour groups: torso, head, left hand, right hand.
JOINT_GROUPS = np.array([0, 0, 1, 0, 0, 0, 0, 2, 3, 2, 3])
GROUP_COLORS = np.array(
    [
        [0.55, 0.55, 0.55],
        [1.00, 0.80, 0.60],
        [1.00, 0.25, 0.20],
        [0.20, 0.45, 1.00],
    ]
)

# Hand-tip working space for motion primitives: centre and half-extent per axis.
_HAND_CENTER = {L_HAND: np.array([-0.22, 0.32, 0.22]), R_HAND: np.array([0.22, 0.32, 0.22])}
_HAND_SPREAD = np.array([0.18, 0.20, 0.12])
_SIGNER_JITTER = 0.015

# Projection: pixels per unit length relative to the short image side.
PROJECTION_SCALE = 0.35
BLOB_SIGMA_FRACTION = 1.0 / 32.0


@dataclass(frozen=True)
class SkeletonSequence:
    """Per-frame 3D joints in pelvis-centred coordinates, shape [T, J, 3]."""

    joints: np.ndarray

    def __post_init__(self):
        if self.joints.ndim != 3 or self.joints.shape[2] != 3 or self.joints.shape[0] < 1:
            raise InvalidArgumentError(f"Expected joints of shape [T>=1, J, 3], got {self.joints.shape}")

    @property
    def num_frames(self) -> int:
        return self.joints.shape[0]

    @property
    def num_joints(self) -> int:
        return self.joints.shape[1]


def _bezier(control: np.ndarray, steps: int) -> np.ndarray:
    """Evaluate a cubic Bezier with control points [4, 3] at `steps` samples."""
    s = np.linspace(0.0, 1.0, steps)[:, None]
    return (
        (1 - s) ** 3 * control[0]
        + 3 * (1 - s) ** 2 * s * control[1]
        + 3 * (1 - s) * s**2 * control[2]
        + s**3 * control[3]
    )


def gloss_primitive(vocab: GlossVocabulary, gloss: int) -> dict:
    """Bezier control points of both hand tips for one gloss."""
    rng = np.random.default_rng([vocab.primitive_seed, gloss])
    return {
        hand: center + rng.uniform(-1.0, 1.0, size=(4, 3)) * _HAND_SPREAD
        for hand, center in _HAND_CENTER.items()
    }


def _pose_arms(frames: np.ndarray) -> None:
    """Place elbows and wrists along each shoulder-to-hand-tip line, in place."""
    for shoulder, elbow, wrist, tip, side in (
        (L_SHOULDER, L_ELBOW, L_WRIST, L_HAND, -1.0),
        (R_SHOULDER, R_ELBOW, R_WRIST, R_HAND, 1.0),
    ):
        reach = frames[:, tip] - frames[:, shoulder]
        frames[:, wrist] = frames[:, shoulder] + 0.85 * reach
        frames[:, elbow] = frames[:, shoulder] + 0.45 * reach + np.array([0.06 * side, -0.12, 0.0])


def synthesize_motion(glosses, vocab: GlossVocabulary, frames_per_gloss: int, rng_seed: int,
                      transition_frames: int = 2) -> SkeletonSequence:
    """
    Compose a skeleton sequence from per-gloss hand-tip trajectories.

    Consecutive gloss segments are joined by `transition_frames` linearly
    interpolated frames, so T = M * frames_per_gloss + (M - 1) * transition_frames.
    `rng_seed` draws one small per-sequence hand offset (signer variation);
    torso joints never move and the pelvis stays at the origin.

    Args:
        glosses: Gloss index sequence
        vocab: Vocabulary the indices refer to
        frames_per_gloss: Frames per gloss segment
        rng_seed: Per-sequence seed
        transition_frames: Frames between consecutive glosses

    Returns:
        SkeletonSequence
    """
    glosses = [int(g) for g in glosses]
    if not glosses:
        raise InvalidArgumentError("Cannot synthesize an empty gloss sequence")
    if any(g == vocab.blank_index for g in glosses):
        raise InvalidArgumentError("The blank index is not a gloss")
    if any(not 0 <= g < vocab.size for g in glosses):
        raise InvalidArgumentError(f"Gloss index out of range for vocabulary of size {vocab.size}")
    if frames_per_gloss < 1 or transition_frames < 0:
        raise InvalidArgumentError("frames_per_gloss must be >= 1 and transition_frames >= 0")

    offset = np.random.default_rng(rng_seed).normal(0.0, _SIGNER_JITTER, size=3)

    segments = []
    for gloss in glosses:
        segment = np.repeat(REST_POSE[None], frames_per_gloss, axis=0)
        for hand, control in gloss_primitive(vocab, gloss).items():
            segment[:, hand] = _bezier(control, frames_per_gloss) + offset
        _pose_arms(segment)
        segments.append(segment)

    parts = [segments[0]]
    for previous, following in zip(segments, segments[1:]):
        if transition_frames:
            weights = (np.arange(1, transition_frames + 1) / (transition_frames + 1))[:, None, None]
            parts.append((1 - weights) * previous[-1] + weights * following[0])
        parts.append(following)
    return SkeletonSequence(np.concatenate(parts, axis=0))


def rotation_matrix(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """R_view = R_y(yaw) @ R_x(pitch), angles taken modulo 360 degrees."""
    alpha = np.deg2rad(yaw_deg % 360.0)
    beta = np.deg2rad(pitch_deg % 360.0)
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    r_y = np.array([[ca, 0.0, sa], [0.0, 1.0, 0.0], [-sa, 0.0, ca]])
    r_x = np.array([[1.0, 0.0, 0.0], [0.0, cb, -sb], [0.0, sb, cb]])
    return r_y @ r_x


def rotate_view(skel: SkeletonSequence, yaw_deg: float, pitch_deg: float) -> SkeletonSequence:
    """Apply one rigid root rotation to every joint of every frame."""
    rotation = rotation_matrix(yaw_deg, pitch_deg)
    return SkeletonSequence(np.einsum("ij,tkj->tki", rotation, skel.joints))


def render_frames(skel: SkeletonSequence, height: int, width: int, joint_groups=None) -> np.ndarray:
    """
    Rasterise a skeleton to RGB frames of shape [T, 3, H, W] in [0, 1].

    Weak-perspective projection: the depth axis (z) is dropped after a fixed
    global scale, the pelvis lands on pixel (H // 2, W // 2). Each joint is a
    Gaussian blob in its group colour, composited far-to-near so nearer
    blobs cover farther ones. `joint_groups` overrides the colour group of
    each joint (defaults to the 11-joint layout).
    """
    if height < 16 or width < 16:
        raise InvalidArgumentError(f"Frames must be at least 16x16, got {height}x{width}")
    joints = skel.joints
    if not np.all(np.isfinite(joints)):
        raise InvalidArgumentError("Skeleton has non-finite coordinates")

    num_frames, num_joints, _ = joints.shape
    scale = PROJECTION_SCALE * min(height, width)
    sigma = max(1.0, BLOB_SIGMA_FRACTION * min(height, width))

    u = width // 2 + scale * joints[..., 0]
    v = height // 2 - scale * joints[..., 1]
    # Stable sort: equal depths keep joint order, later joints drawn on top.
    order = np.argsort(joints[..., 2], axis=1, kind="stable")
    if joint_groups is None:
        joint_groups = JOINT_GROUPS if num_joints == NUM_JOINTS else np.zeros(num_joints, dtype=int)
    colors = GROUP_COLORS[np.asarray(joint_groups)]

    rows = np.arange(height, dtype=np.float64)[None, :, None]
    cols = np.arange(width, dtype=np.float64)[None, None, :]
    frames = np.zeros((num_frames, 3, height, width))
    frame_ids = np.arange(num_frames)
    for rank in range(num_joints):
        joint = order[:, rank]
        cu = u[frame_ids, joint][:, None, None]
        cv = v[frame_ids, joint][:, None, None]
        weight = np.exp(-((rows - cv) ** 2 + (cols - cu) ** 2) / (2.0 * sigma**2))[:, None]
        color = colors[joint][:, :, None, None]
        frames = frames * (1.0 - weight) + color * weight
    return np.clip(frames, 0.0, 1.0).astype(np.float32)


def generate_dataset(config: GenerationConfig, out_dir) -> DatasetManifest:
    """
    Generate every source sequence, render all seven views and write the dataset.

    Sources are numbered train first, then dev, then test. Every random draw
    is seeded from (config.seed, source index), so a fixed config produces
    byte-identical output.

    Args:
        config: Generation parameters
        out_dir: Dataset directory (created if missing)

    Returns:
        DatasetManifest of the written dataset
    """
    counts = {"train": config.train_sources, "dev": config.dev_sources, "test": config.test_sources}
    if min(counts.values()) < 1:
        raise InvalidArgumentError(f"Every split needs at least one source, got {counts}")

    out_dir = Path(out_dir)
    try:
        (out_dir / FRAMES_DIR).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactIOError(out_dir, f"Cannot create dataset directory ({e.strerror})") from e

    vocab = build_vocabulary(config.vocab_size, config.seed)
    entries = []
    index = 0
    for split in SPLITS:
        for _ in range(counts[split]):
            source_id = f"S{index:05d}"
            rng = np.random.default_rng([config.seed, index])
            length = int(rng.integers(config.min_glosses, config.max_glosses + 1))
            glosses = tuple(int(g) for g in rng.integers(0, vocab.size, size=length))
            skel = synthesize_motion(
                glosses,
                vocab,
                config.frames_per_gloss,
                rng_seed=int(rng.integers(2**31)),
                transition_frames=config.transition_frames,
            )
            for view in VIEW_ANGLES:
                frames = render_frames(rotate_view(skel, view.yaw_deg, view.pitch_deg), config.height, config.width)
                frame_path = f"{FRAMES_DIR}/{source_id}_{view.name}.bin"
                write_frames(out_dir / frame_path, frames)
                entries.append(ManifestEntry(source_id, view.name, split, skel.num_frames, glosses, frame_path))
            index += 1
        logger.info("Rendered %d %s sources", counts[split], split)

    manifest = DatasetManifest(entries=entries, vocabulary=vocab, config_hash=config_hash(config), root=out_dir)
    manifest.validate()
    write_manifest(manifest, out_dir, generation=flatten(config))
    return manifest
