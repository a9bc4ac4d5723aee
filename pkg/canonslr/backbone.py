"""
Recognizer network shared by teacher and student.

frames [T, 3, H, W]
  -> stem + 4 residual stages (TME after stages 3 and 4 when enabled)
  -> spatial average pool, V [T, C4]
  -> 2 x (Conv1d k=5 -> BN -> ReLU -> MaxPool 2), T' = T // 4 -> conv logits
  -> BiLSTM -> linear classifier -> sequence logits

Time plays the role of the batch dimension inside the 2D stages, so one
forward call handles one video.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from canonslr.errors import InvalidArgumentError
from canonslr.settings import TEMPORAL_STRIDE
from canonslr.tme import DEFAULT_TOP_K, TemporalMotionEnhancement

STAGE_WIDTHS = (16, 32, 64, 128)
TME_STAGES = (3, 4)
TEMPORAL_KERNEL = 5
TEMPORAL_HIDDEN = 128
LSTM_HIDDEN = 128
MIN_FRAMES = 4


@dataclass
class FeatureStageMap:
    """Output of one residual stage, features laid out [C, T, H, W]."""

    stage: int
    features: torch.Tensor


@dataclass
class RecognizerOutput:
    """Auxiliary conv logits, final sequence logits (both [T', V + 1]) and BiLSTM states [T', D]."""

    conv_logits: torch.Tensor
    seq_logits: torch.Tensor
    hidden: torch.Tensor


class BasicBlock(nn.Module):
    """Two 3x3 convolutions with a projection shortcut; halves H and W."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride=2, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        self.shortcut = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, 1, stride=2, bias=False),
            nn.BatchNorm2d(out_channels),
        )

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class VisualEncoder(nn.Module):
    """Per-frame residual encoder with a TME block available after stages 3 and 4."""

    def __init__(self, tme_top_k: int = DEFAULT_TOP_K):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(3, STAGE_WIDTHS[0], 3, padding=1, bias=False),
            nn.BatchNorm2d(STAGE_WIDTHS[0]),
            nn.ReLU(inplace=True),
        )
        widths = (STAGE_WIDTHS[0],) + STAGE_WIDTHS
        self.stages = nn.ModuleList(BasicBlock(widths[i], widths[i + 1]) for i in range(len(STAGE_WIDTHS)))
        # Built for every insertion point so teacher and student share one parameter layout.
        self.tme = nn.ModuleDict(
            {str(stage): TemporalMotionEnhancement(STAGE_WIDTHS[stage - 1], tme_top_k) for stage in TME_STAGES}
        )

    @property
    def out_channels(self) -> int:
        return STAGE_WIDTHS[-1]

    def forward(self, frames: torch.Tensor, tme_stages=()) -> tuple[list[FeatureStageMap], torch.Tensor]:
        x = self.stem(frames)
        stage_maps = []
        for index, stage in enumerate(self.stages, start=1):
            x = stage(x)
            if index in tme_stages:
                x = self.tme[str(index)](x.transpose(0, 1)).transpose(0, 1).contiguous()
            stage_maps.append(FeatureStageMap(stage=index, features=x.transpose(0, 1)))
        pooled = x.mean(dim=(2, 3))
        return stage_maps, pooled


class TemporalHead(nn.Module):
    """1D temporal convolutions, a bidirectional LSTM and the two classifiers."""

    def __init__(self, in_channels: int, num_classes: int):
        super().__init__()
        self.temporal = nn.Sequential(
            nn.Conv1d(in_channels, TEMPORAL_HIDDEN, TEMPORAL_KERNEL, padding=TEMPORAL_KERNEL // 2),
            nn.BatchNorm1d(TEMPORAL_HIDDEN),
            nn.ReLU(inplace=True),
            nn.MaxPool1d(2),
            nn.Conv1d(TEMPORAL_HIDDEN, TEMPORAL_HIDDEN, TEMPORAL_KERNEL, padding=TEMPORAL_KERNEL // 2),
            nn.BatchNorm1d(TEMPORAL_HIDDEN),
            nn.ReLU(inplace=True),
            nn.MaxPool1d(2),
        )
        self.conv_classifier = nn.Linear(TEMPORAL_HIDDEN, num_classes)
        self.lstm = nn.LSTM(TEMPORAL_HIDDEN, LSTM_HIDDEN, batch_first=True, bidirectional=True)
        self.classifier = nn.Linear(2 * LSTM_HIDDEN, num_classes)

    def forward(self, pooled: torch.Tensor) -> RecognizerOutput:
        if pooled.shape[0] < MIN_FRAMES:
            raise InvalidArgumentError(
                f"Temporal head needs at least {MIN_FRAMES} frames, got {pooled.shape[0]}"
            )
        conv = self.temporal(pooled.t().unsqueeze(0)).squeeze(0).t()
        hidden, _ = self.lstm(conv.unsqueeze(0))
        hidden = hidden.squeeze(0)
        return RecognizerOutput(
            conv_logits=self.conv_classifier(conv),
            seq_logits=self.classifier(hidden),
            hidden=hidden,
        )


class Recognizer(nn.Module):
    """
    Full gloss recognizer.

    `tme_stages` picks which of the TME blocks run; the blocks exist either
    way, so a teacher (no TME) and a student (TME at 3 and 4) have equal
    parameter manifests.
    """

    def __init__(self, num_classes: int, tme_stages=TME_STAGES, tme_top_k: int = DEFAULT_TOP_K):
        super().__init__()
        if not set(tme_stages) <= set(TME_STAGES):
            raise InvalidArgumentError(f"TME can only be inserted after stages {TME_STAGES}, got {tme_stages}")
        self.num_classes = num_classes
        self.tme_stages = tuple(sorted(tme_stages))
        self.encoder = VisualEncoder(tme_top_k)
        self.head = TemporalHead(self.encoder.out_channels, num_classes)

    def encode_visual(self, frames: torch.Tensor) -> tuple[list[FeatureStageMap], torch.Tensor]:
        """Stage feature maps and per-frame pooled features V [T, C4]."""
        if frames.ndim != 4 or frames.shape[1] != 3:
            raise InvalidArgumentError(f"Expected frames [T, 3, H, W], got {tuple(frames.shape)}")
        if frames.shape[2] % 16 or frames.shape[3] % 16:
            raise InvalidArgumentError(f"Frame height and width must be divisible by 16, got {tuple(frames.shape[2:])}")
        return self.encoder(frames, self.tme_stages)

    def temporal_head(self, pooled: torch.Tensor) -> RecognizerOutput:
        return self.head(pooled)

    def forward(self, frames: torch.Tensor) -> RecognizerOutput:
        _, pooled = self.encode_visual(frames)
        return self.head(pooled)


def output_length(num_frames: int) -> int:
    """T' produced by the temporal head for a T-frame input."""
    return num_frames // TEMPORAL_STRIDE


def shape_manifest(model: nn.Module) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) of every parameter and buffer."""
    return [(name, tuple(tensor.shape)) for name, tensor in model.state_dict().items()]
