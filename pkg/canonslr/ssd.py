"""
Sequence-level soft-target distillation from the frozen anchor-view teacher.
"""

import torch
import torch.nn.functional as F

from canonslr.errors import InvalidArgumentError
from canonslr.settings import DistillConfig
from canonslr.views import ViewAngle

__all__ = ["DistillConfig", "align_temporal", "ssd_loss"]


def align_temporal(teacher_logits: torch.Tensor, target_len: int) -> torch.Tensor:
    """
    Resample teacher logits [T_t, C] to [target_len, C] along time.

    Linear interpolation on raw logits with the first and last frames
    pinned to the first and last output positions; a single teacher frame
    is repeated.
    """
    if target_len < 1:
        raise InvalidArgumentError(f"target_len must be >= 1, got {target_len}")
    if teacher_logits.ndim != 2 or teacher_logits.shape[0] < 1:
        raise InvalidArgumentError(f"Expected teacher logits [T >= 1, C], got {tuple(teacher_logits.shape)}")
    if teacher_logits.shape[0] == target_len:
        return teacher_logits.clone()
    if teacher_logits.shape[0] == 1:
        return teacher_logits.expand(target_len, -1).clone()
    resampled = F.interpolate(teacher_logits.t().unsqueeze(0), size=target_len, mode="linear", align_corners=True)
    return resampled.squeeze(0).t()


def ssd_loss(teacher_aligned: torch.Tensor, student_logits: torch.Tensor, view: ViewAngle,
             cfg: DistillConfig) -> torch.Tensor:
    """
    T_d^2 * KL(softmax(teacher / T_d) || softmax(student / T_d)).

    KL is summed over classes and averaged over frames. The teacher side is
    detached. Samples of the anchor view (`cfg.frontal_view`) contribute 0.
    """
    if teacher_aligned.shape != student_logits.shape:
        raise InvalidArgumentError(
            f"Teacher logits {tuple(teacher_aligned.shape)} and student logits "
            f"{tuple(student_logits.shape)} differ in shape"
        )
    if view.name == cfg.frontal_view:
        return student_logits.new_zeros(())

    t = cfg.temperature
    teacher_probs = F.softmax(teacher_aligned.detach() / t, dim=-1)
    student_log_probs = F.log_softmax(student_logits / t, dim=-1)
    per_frame = F.kl_div(student_log_probs, teacher_probs, reduction="none").sum(dim=-1)
    return per_frame.mean() * (t * t)
