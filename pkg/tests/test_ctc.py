"""Tests for canonslr.ctc against brute-force path enumeration."""

import itertools
import math

import numpy as np
import pytest
import torch

from canonslr.ctc import (
    batch_ctc_loss,
    beam_decode,
    collapse,
    ctc_loss,
    greedy_decode,
    required_frames,
)
from canonslr.errors import FeasibilityError, InvalidArgumentError


def path_marginals(logits: torch.Tensor) -> dict:
    """Probability of every collapsed label sequence, by enumerating all paths."""
    log_probs = torch.log_softmax(logits.double(), dim=1).numpy()
    num_frames, num_classes = log_probs.shape
    blank = num_classes - 1
    marginals = {}
    for path in itertools.product(range(num_classes), repeat=num_frames):
        p = math.exp(sum(log_probs[t, k] for t, k in enumerate(path)))
        key = tuple(collapse(path, blank))
        marginals[key] = marginals.get(key, 0.0) + p
    return marginals


def rel_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-8)))


# --- collapse --------------------------------------------------------------

@pytest.mark.parametrize(
    "path,expected",
    [
        ([0, 0, 2, 1], [0, 1]),
        ([2, 2], []),
        ([0, 2, 0], [0, 0]),
    ],
)
def test_collapse_examples(path, expected):
    assert collapse(path, blank=2) == expected


def test_collapse_is_idempotent_on_clean_sequences():
    clean = [0, 1, 0, 3, 1]
    assert collapse(collapse(clean, blank=4), blank=4) == clean


def test_required_frames_counts_repeats():
    assert required_frames([0, 0, 1, 1, 1]) == 5 + 3
    assert required_frames([0, 1, 2]) == 3


# --- loss ------------------------------------------------------------------

def test_single_frame_single_path():
    logits = torch.log(torch.tensor([[0.7, 0.1, 0.2]], dtype=torch.float64))
    assert ctc_loss(logits, [0]).item() == pytest.approx(-math.log(0.7), abs=1e-12)


def test_two_uniform_frames_have_three_valid_paths():
    logits = torch.zeros(2, 3, dtype=torch.float64)
    assert ctc_loss(logits, [0]).item() == pytest.approx(math.log(3.0), abs=1e-12)


def test_repeat_without_room_for_a_blank_is_infeasible():
    with pytest.raises(FeasibilityError):
        ctc_loss(torch.zeros(1, 3), [0, 0])


def test_nan_logits_and_bad_targets_are_invalid():
    with pytest.raises(InvalidArgumentError):
        ctc_loss(torch.full((3, 3), float("nan")), [0])
    with pytest.raises(InvalidArgumentError):
        ctc_loss(torch.zeros(3, 3), [2])
    with pytest.raises(InvalidArgumentError):
        ctc_loss(torch.zeros(3, 3), [5])


@pytest.mark.parametrize("vocab", [1, 2, 3])
def test_loss_matches_path_enumeration(vocab):
    rng = np.random.default_rng(vocab)
    for num_frames in range(1, 7):
        logits = torch.from_numpy(rng.normal(size=(num_frames, vocab + 1)) * 2.0)
        marginals = path_marginals(logits)
        for length in range(1, 4):
            for target in itertools.product(range(vocab), repeat=length):
                if required_frames(target) > num_frames:
                    continue
                oracle = marginals.get(tuple(target), 0.0)
                loss = ctc_loss(logits, list(target)).item()
                assert math.exp(-loss) == pytest.approx(oracle, abs=1e-10)
                assert loss >= 0.0


def test_loss_is_zero_when_all_mass_is_on_the_target():
    logits = torch.tensor([[50.0, -50.0, -50.0], [-50.0, -50.0, 50.0], [-50.0, 50.0, -50.0]], dtype=torch.float64)
    assert ctc_loss(logits, [0, 1]).item() == pytest.approx(0.0, abs=1e-12)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(0)
    logits = torch.from_numpy(rng.normal(size=(6, 4))).requires_grad_(True)
    target = [0, 2, 2]
    ctc_loss(logits, target).backward()

    eps = 1e-5
    numeric = np.zeros((6, 4))
    base = logits.detach().clone()
    for t in range(6):
        for k in range(4):
            plus, minus = base.clone(), base.clone()
            plus[t, k] += eps
            minus[t, k] -= eps
            numeric[t, k] = (ctc_loss(plus, target).item() - ctc_loss(minus, target).item()) / (2 * eps)
    assert np.allclose(logits.grad.numpy(), numeric, rtol=1e-5, atol=1e-8)


def test_gradcheck():
    logits = torch.randn(5, 3, dtype=torch.float64, generator=torch.Generator().manual_seed(1), requires_grad=True)
    assert torch.autograd.gradcheck(lambda x: ctc_loss(x, [1, 0]), (logits,))


def test_batch_loss_is_the_mean():
    a = torch.zeros(2, 3, dtype=torch.float64)
    b = torch.log(torch.tensor([[0.7, 0.1, 0.2]], dtype=torch.float64))
    expected = (math.log(3.0) - math.log(0.7)) / 2
    assert batch_ctc_loss([a, b], [[0], [0]]).item() == pytest.approx(expected, abs=1e-12)


def test_empty_target_is_the_all_blank_path():
    assert ctc_loss(torch.zeros(2, 3, dtype=torch.float64), []).item() == pytest.approx(2 * math.log(3.0), abs=1e-12)


def test_single_precision_logits_get_a_single_precision_loss_and_gradient():
    logits = torch.zeros(4, 3, requires_grad=True)
    loss = ctc_loss(logits, [0, 1])
    assert loss.dtype == torch.float32
    loss.backward()
    assert logits.grad.dtype == torch.float32
    # Per frame the gradient is softmax minus occupancy, so each row sums to zero.
    assert torch.allclose(logits.grad.sum(dim=1), torch.zeros(4), atol=1e-6)


# --- decoding --------------------------------------------------------------

def _one_hot_path(path, num_classes, peak=10.0):
    logits = torch.zeros(len(path), num_classes)
    for t, k in enumerate(path):
        logits[t, k] = peak
    return logits


def test_greedy_decode_examples():
    assert greedy_decode(_one_hot_path([0, 0, 2, 1], 3)) == [0, 1]
    assert greedy_decode(_one_hot_path([2, 2, 2], 3)) == []
    assert greedy_decode(_one_hot_path([1], 3)) == [1]


def test_greedy_ties_go_to_the_lower_index():
    assert greedy_decode(torch.zeros(1, 3)) == [0]


def test_beam_of_one_equals_greedy_on_peaked_logits():
    logits = _one_hot_path([1, 1, 3, 0, 3, 0, 2], 4)
    assert beam_decode(logits, beam_width=1) == greedy_decode(logits) == [1, 0, 0, 2]


@pytest.mark.parametrize("num_frames,vocab", [(3, 2), (4, 2), (3, 3), (4, 3)])
def test_wide_beam_equals_exhaustive_marginal_argmax(num_frames, vocab):
    rng = np.random.default_rng(num_frames * 10 + vocab)
    for _ in range(5):
        logits = torch.from_numpy(rng.normal(size=(num_frames, vocab + 1)) * 1.5)
        marginals = path_marginals(logits)
        best = max(marginals.items(), key=lambda item: item[1])[0]
        assert beam_decode(logits, beam_width=(vocab + 1) ** num_frames) == list(best)


def test_beam_on_uniform_logits_is_deterministic():
    logits = torch.zeros(4, 3)
    assert beam_decode(logits, 5) == beam_decode(logits, 5)


def test_beam_width_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        beam_decode(torch.zeros(2, 3), 0)
