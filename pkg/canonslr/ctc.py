"""
Connectionist temporal classification: loss, collapsing and decoding.

All functions take time-major logits [T', V + 1] for a single sequence;
the blank is the last class unless given explicitly.
"""

import numpy as np
import torch
import torch.nn.functional as F

from canonslr.errors import FeasibilityError, InvalidArgumentError

NEG_INF = -np.inf


def collapse(path, blank: int) -> list[int]:
    """Merge adjacent repeats, then drop blanks: B(path)."""
    out = []
    previous = None
    for symbol in path:
        symbol = int(symbol)
        if symbol != previous and symbol != blank:
            out.append(symbol)
        previous = symbol
    return out


def required_frames(target) -> int:
    """Minimum number of frames a CTC path for `target` needs."""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def ctc_loss(logits: torch.Tensor, target, blank: int | None = None) -> torch.Tensor:
    """
    -log sum over alignment paths collapsing to `target` of p(path | logits).

    Runs torch's log-space CTC kernel in float64 and returns the loss in
    the dtype of `logits`.

    Args:
        logits: Unnormalised scores [T', V + 1]; softmax is applied per frame
        target: Gloss index sequence (no blanks)
        blank: Blank class index, default the last class

    Returns:
        Scalar tensor, differentiable w.r.t. `logits`

    Raises:
        InvalidArgumentError: NaN logits or a blank inside the target
        FeasibilityError: `target` needs more frames than T'
    """
    if logits.ndim != 2:
        raise InvalidArgumentError(f"Expected logits [T', C], got shape {tuple(logits.shape)}")
    if torch.isnan(logits).any():
        raise InvalidArgumentError("CTC logits contain NaN")
    blank = logits.shape[1] - 1 if blank is None else blank
    target = [int(g) for g in target]
    if any(g == blank or not 0 <= g < logits.shape[1] for g in target):
        raise InvalidArgumentError(f"Target {target} contains the blank or an out-of-range class")
    needed = required_frames(target)
    if needed > logits.shape[0]:
        raise FeasibilityError(f"Target of length {len(target)} needs {needed} frames, logits have {logits.shape[0]}")

    log_probs = F.log_softmax(logits.double(), dim=1)
    if not target:
        # The all-blank path is the only one.
        return -log_probs[:, blank].sum().to(logits.dtype)
    loss = F.ctc_loss(
        log_probs.unsqueeze(1),
        torch.tensor([target], dtype=torch.long, device=logits.device),
        input_lengths=torch.tensor([logits.shape[0]], dtype=torch.long),
        target_lengths=torch.tensor([len(target)], dtype=torch.long),
        blank=blank,
        reduction="sum",
    )
    return loss.to(logits.dtype)


def batch_ctc_loss(logits_list, targets, blank: int | None = None) -> torch.Tensor:
    """Mean of `ctc_loss` over a batch of variable-length sequences."""
    losses = [ctc_loss(logits, target, blank) for logits, target in zip(logits_list, targets)]
    return torch.stack(losses).mean()


def greedy_decode(logits: torch.Tensor, blank: int | None = None) -> list[int]:
    """Per-frame argmax (lowest index wins ties), then collapse."""
    values = logits.detach().cpu().numpy()
    blank = values.shape[1] - 1 if blank is None else blank
    return collapse(values.argmax(axis=1), blank)


def beam_decode(logits: torch.Tensor, beam_width: int, blank: int | None = None) -> list[int]:
    """
    Prefix beam search over collapsed label prefixes.

    Each prefix carries two log scores: paths ending in blank and paths
    ending in its last label, so "a a" and "a - a" are kept apart. After
    every frame the `beam_width` best prefixes survive; ties are broken by
    the prefix itself (shorter, then lexicographically smaller, first).

    Args:
        logits: Unnormalised scores [T', V + 1]
        beam_width: Number of prefixes kept per frame (>= 1)
        blank: Blank class index, default the last class

    Returns:
        Most probable collapsed gloss sequence
    """
    if beam_width < 1:
        raise InvalidArgumentError(f"beam_width must be >= 1, got {beam_width}")
    log_probs = F.log_softmax(logits.detach().cpu().double(), dim=1).numpy()
    num_classes = log_probs.shape[1]
    blank = num_classes - 1 if blank is None else blank

    def rank(item):
        prefix, (p_blank, p_label) = item
        return (-np.logaddexp(p_blank, p_label), len(prefix), prefix)

    beam = {(): (0.0, NEG_INF)}
    for frame in log_probs:
        candidates = {}

        def add(prefix, p_blank=NEG_INF, p_label=NEG_INF):
            old_blank, old_label = candidates.get(prefix, (NEG_INF, NEG_INF))
            candidates[prefix] = (np.logaddexp(old_blank, p_blank), np.logaddexp(old_label, p_label))

        for prefix, (p_blank, p_label) in beam.items():
            total = np.logaddexp(p_blank, p_label)
            for k in range(num_classes):
                p = frame[k]
                if k == blank:
                    add(prefix, p_blank=total + p)
                elif prefix and prefix[-1] == k:
                    add(prefix, p_label=p_label + p)
                    add(prefix + (k,), p_label=p_blank + p)
                else:
                    add(prefix + (k,), p_label=total + p)

        beam = dict(sorted(candidates.items(), key=rank)[:beam_width])

    best, _ = min(beam.items(), key=rank)
    return list(best)
