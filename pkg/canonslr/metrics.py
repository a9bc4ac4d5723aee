"""
Word error rate with a substitution / insertion / deletion breakdown, and
the per-view report built from it.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from canonslr.errors import InvalidArgumentError
from canonslr.views import VIEW_CATEGORIES, VIEW_NAMES

REPORT_COLUMNS = ["name", "WER", "del", "ins", "sub", "n_samples"]


@dataclass(frozen=True)
class EditBreakdown:
    """Error counts of one alignment (or a sum of alignments) against `ref_len` reference glosses."""

    sub: int
    ins: int
    dels: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.sub + self.ins + self.dels

    @property
    def wer(self) -> float:
        return self.errors / self.ref_len

    def __add__(self, other: "EditBreakdown") -> "EditBreakdown":
        return EditBreakdown(
            self.sub + other.sub, self.ins + other.ins, self.dels + other.dels, self.ref_len + other.ref_len
        )


def edit_table(reference, hypothesis) -> tuple[np.ndarray, np.ndarray]:
    """
    Unit-cost Levenshtein DP tables, each shape [len(ref) + 1, len(hyp) + 1]:
    edit distances, and the most substitutions any minimum-cost alignment
    of each prefix pair can use.
    """
    n, m = len(reference), len(hypothesis)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    s = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if reference[i - 1] == hypothesis[j - 1] else 1
            # Lexicographic minimum of (edits, -substitutions).
            d[i, j], neg_sub = min(
                (d[i - 1, j - 1] + cost, -(s[i - 1, j - 1] + cost)),
                (d[i, j - 1] + 1, -s[i, j - 1]),
                (d[i - 1, j] + 1, -s[i - 1, j]),
            )
            s[i, j] = -neg_sub
    return d, s


def edit_breakdown(reference, hypothesis) -> EditBreakdown:
    """
    Minimum edit alignment of `hypothesis` against `reference`.

    Among equally cheap alignments the one with the most substitutions
    wins, then the backtrace prefers the diagonal, then insertion, then
    deletion. Since ins - del = len(hyp) - len(ref) for every alignment,
    the counts are unique, and swapping the arguments swaps ins and del.
    """
    reference, hypothesis = list(reference), list(hypothesis)
    if not reference:
        raise InvalidArgumentError("Reference sequence must not be empty")
    d, s = edit_table(reference, hypothesis)

    sub = ins = dels = 0
    i, j = len(reference), len(hypothesis)
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if reference[i - 1] == hypothesis[j - 1] else 1
            if d[i, j] == d[i - 1, j - 1] + cost and s[i, j] == s[i - 1, j - 1] + cost:
                sub += cost
                i, j = i - 1, j - 1
                continue
        if j > 0 and d[i, j] == d[i, j - 1] + 1 and s[i, j] == s[i, j - 1]:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return EditBreakdown(sub=sub, ins=ins, dels=dels, ref_len=len(reference))


def corpus_wer(pairs) -> EditBreakdown:
    """Sum error counts and reference lengths over (reference, hypothesis) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise InvalidArgumentError("corpus_wer needs at least one pair")
    total = EditBreakdown(0, 0, 0, 0)
    for index, (reference, hypothesis) in enumerate(pairs):
        if len(reference) == 0:
            raise InvalidArgumentError(f"Empty reference at index {index}")
        total = total + edit_breakdown(reference, hypothesis)
    return total


def _row(name: str, breakdown: EditBreakdown, n_samples: int) -> dict:
    return {
        "name": name,
        "WER": 100.0 * breakdown.wer,
        "del": 100.0 * breakdown.dels / breakdown.ref_len,
        "ins": 100.0 * breakdown.ins / breakdown.ref_len,
        "sub": 100.0 * breakdown.sub / breakdown.ref_len,
        "n_samples": n_samples,
    }


def build_report(results) -> pd.DataFrame:
    """
    Per-view, per-category and overall WER table (percent).

    Args:
        results: Iterable of (view name, reference, hypothesis)

    Returns:
        DataFrame with REPORT_COLUMNS: one row per view present, one per
        category (mean of its member views), then "All" (corpus level)
    """
    by_view = {}
    for view, reference, hypothesis in results:
        by_view.setdefault(view, []).append((reference, hypothesis))
    if not by_view:
        raise InvalidArgumentError("Cannot build a report from zero results")

    view_rows = {view: _row(view, corpus_wer(pairs), len(pairs)) for view, pairs in by_view.items()}
    rows = [view_rows[view] for view in VIEW_NAMES if view in view_rows]

    for category, members in VIEW_CATEGORIES.items():
        present = [view_rows[v] for v in members if v in view_rows]
        if not present:
            continue
        row = {"name": category}
        for column in ("WER", "del", "ins", "sub"):
            row[column] = float(np.mean([r[column] for r in present]))
        row["n_samples"] = sum(r["n_samples"] for r in present)
        rows.append(row)

    every_pair = [pair for pairs in by_view.values() for pair in pairs]
    rows.append(_row("All", corpus_wer(every_pair), len(every_pair)))
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_report(report: pd.DataFrame, path) -> None:
    """Tab-separated report file, two decimals for rates."""
    report.to_csv(path, sep="\t", index=False, float_format="%.2f")
