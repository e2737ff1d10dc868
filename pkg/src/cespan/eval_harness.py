"""Competition-style metrics, cross-validation, and significance testing.

Word-level weighted precision/recall/F1 over collapsed {C,E,O} labels plus
per-example Exact Match, the k-fold x multi-seed protocol that yields the
paired score grids, and the paired t-test with the four significance
levels used for reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .corpus import collapse
from .errors import CespanError
from .rng import substream

CLASSES = ("C", "E", "O")

# Two-sided critical values of Student's t at 14 degrees of freedom for the
# four reporting levels (0.05, 0.10, 0.15, 0.20); frozen so the full
# 15-sample protocol never depends on the scipy version.
T14_CRITICAL = {
    0.05: 2.1447866879169273,
    0.10: 1.7613101357748562,
    0.15: 1.5230950609257863,
    0.20: 1.345030374454649,
}
SIGNIFICANCE_MARKS = ((0.05, "***"), (0.10, "**"), (0.15, "*"), (0.20, "^"))


class EvalError(CespanError):
    pass


@dataclass
class MetricsReport:
    precision: float  # weighted averages, in percent
    recall: float
    f1: float
    exact_match: float
    per_class: dict = field(default_factory=dict)
    n_examples: int = 0
    n_words: int = 0

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "exact_match": self.exact_match,
            "per_class": self.per_class,
            "n_examples": self.n_examples,
            "n_words": self.n_words,
        }

    def row(self) -> str:
        return (
            f"{self.precision:8.2f} {self.recall:8.2f} "
            f"{self.f1:8.2f} {self.exact_match:11.2f}"
        )


def _collapse_seqs(seqs):
    return [[collapse(t) for t in seq] for seq in seqs]


def token_metrics(gold_seqs, pred_seqs):
    """Weighted P/R/F1 in percent over word-level collapsed labels.

    Counts are pooled over the whole dataset per class, then averaged with
    weights proportional to gold support. A class never predicted has
    precision 0 by convention.

    Returns (precision, recall, f1, per_class_dict).
    """
    if len(gold_seqs) != len(pred_seqs):
        raise EvalError(
            f"{len(gold_seqs)} gold sequences vs {len(pred_seqs)} predicted"
        )
    tp = {c: 0 for c in CLASSES}
    fp = {c: 0 for c in CLASSES}
    fn = {c: 0 for c in CLASSES}
    support = {c: 0 for c in CLASSES}
    for i, (gold, pred) in enumerate(zip(_collapse_seqs(gold_seqs), _collapse_seqs(pred_seqs))):
        if len(gold) != len(pred):
            raise EvalError(
                f"sequence {i}: {len(gold)} gold labels vs {len(pred)} predicted"
            )
        for g, p in zip(gold, pred):
            support[g] += 1
            if g == p:
                tp[g] += 1
            else:
                fn[g] += 1
                fp[p] += 1

    per_class = {}
    total = sum(support.values())
    if total == 0:
        raise EvalError("no labels to score")
    weighted_p = weighted_r = weighted_f1 = 0.0
    for c in CLASSES:
        denom_p = tp[c] + fp[c]
        denom_r = tp[c] + fn[c]
        p = tp[c] / denom_p if denom_p else 0.0
        r = tp[c] / denom_r if denom_r else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        per_class[c] = {
            "precision": 100.0 * p,
            "recall": 100.0 * r,
            "f1": 100.0 * f1,
            "support": support[c],
            "tp": tp[c],
            "fp": fp[c],
            "fn": fn[c],
        }
        weight = support[c] / total
        weighted_p += weight * p
        weighted_r += weight * r
        weighted_f1 += weight * f1
    return 100.0 * weighted_p, 100.0 * weighted_r, 100.0 * weighted_f1, per_class


def exact_match(gold_seqs, pred_seqs) -> float:
    """Percentage of examples whose collapsed labels match at every word."""
    if len(gold_seqs) != len(pred_seqs):
        raise EvalError(
            f"{len(gold_seqs)} gold sequences vs {len(pred_seqs)} predicted"
        )
    if not gold_seqs:
        raise EvalError("no examples to score")
    hits = 0
    for gold, pred in zip(_collapse_seqs(gold_seqs), _collapse_seqs(pred_seqs)):
        if len(gold) != len(pred):
            raise EvalError(f"{len(gold)} gold labels vs {len(pred)} predicted")
        hits += gold == pred
    return 100.0 * hits / len(gold_seqs)


def evaluate(gold_seqs, pred_seqs) -> MetricsReport:
    p, r, f1, per_class = token_metrics(gold_seqs, pred_seqs)
    em = exact_match(gold_seqs, pred_seqs)
    return MetricsReport(
        precision=p,
        recall=r,
        f1=f1,
        exact_match=em,
        per_class=per_class,
        n_examples=len(gold_seqs),
        n_words=sum(len(s) for s in gold_seqs),
    )


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

def kfold_split(ids, k: int = 3, seed: int = 0) -> list[list]:
    """Seeded shuffle, then contiguous folds with sizes differing by <= 1."""
    ids = list(ids)
    if k <= 0:
        raise EvalError("k must be positive")
    if k > len(ids):
        raise EvalError(f"cannot make {k} folds from {len(ids)} examples")
    order = substream(seed, "kfold").permutation(len(ids))
    shuffled = [ids[i] for i in order]
    base, extra = divmod(len(ids), k)
    folds = []
    start = 0
    for fold_idx in range(k):
        size = base + (1 if fold_idx < extra else 0)
        folds.append(shuffled[start : start + size])
        start += size
    return folds


@dataclass
class CvCell:
    seed: int
    fold: int
    report: MetricsReport


DEFAULT_CV_SEEDS = (916, 703, 443, 229, 585)


def run_cv(
    dataset,
    config,
    seeds=DEFAULT_CV_SEEDS,
    k: int = 3,
    train_fn=None,
    eval_fn=None,
) -> list[CvCell]:
    """The k-fold x seeds protocol: one report per (seed, fold), in order.

    For each seed the ids are split once; each fold serves as the held-out
    set for a model trained on the rest. ``train_fn(train_set, seed)`` and
    ``eval_fn(model_state, eval_set)`` default to the real pipeline hooks
    installed by the CLI; injecting them keeps this loop testable.
    """
    if train_fn is None or eval_fn is None:
        raise EvalError("run_cv needs train_fn and eval_fn hooks")
    n = len(dataset)
    cells = []
    for seed in seeds:
        folds = kfold_split(list(range(n)), k=k, seed=seed)
        for fold_idx, eval_indices in enumerate(folds):
            eval_set = [dataset[i] for i in eval_indices]
            held = set(eval_indices)
            train_set = [dataset[i] for i in range(n) if i not in held]
            try:
                state = train_fn(train_set, seed)
                report = eval_fn(state, eval_set)
            except CespanError as e:
                raise EvalError(f"(seed={seed}, fold={fold_idx}): {e}") from e
            cells.append(CvCell(seed=seed, fold=fold_idx, report=report))
    return cells


# ---------------------------------------------------------------------------
# Paired t-test
# ---------------------------------------------------------------------------

@dataclass
class TTestResult:
    mean_diff: float
    sd_diff: float
    t: float
    df: int
    n: int
    p_value: float | None
    significance: str  # "***", "**", "*", "^" or ""
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "mean_diff": self.mean_diff,
            "sd_diff": self.sd_diff,
            "t": self.t,
            "df": self.df,
            "n": self.n,
            "p_value": self.p_value,
            "significance": self.significance,
            "note": self.note,
        }


def significance_mark(t: float, df: int) -> str:
    """Smallest cleared reporting level: *** < 0.05, ** < 0.10, * < 0.15,
    ^ < 0.20 (two-sided)."""
    if df == 14:
        for level, mark in SIGNIFICANCE_MARKS:
            if abs(t) > T14_CRITICAL[level]:
                return mark
        return ""
    p = 2.0 * stats.t.sf(abs(t), df)
    for level, mark in SIGNIFICANCE_MARKS:
        if p < level:
            return mark
    return ""


def paired_ttest(a, b) -> TTestResult:
    """Paired two-sided t-test of score lists a vs b (a - b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise EvalError(f"paired samples must align: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise EvalError("need at least 2 paired scores")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 0.0, 0.0, df, n, None, "", note="no difference")
        return TTestResult(
            mean, 0.0, math.copysign(math.inf, mean), df, n, None, "",
            note="degenerate: infinite t",
        )
    t = mean / (sd / math.sqrt(n))
    p = float(2.0 * stats.t.sf(abs(t), df))
    return TTestResult(mean, sd, t, df, n, p, significance_mark(t, df))


def summary_table(rows) -> str:
    """Aligned text table: rows of (label, MetricsReport, marks...)."""
    lines = [
        f"{'Model':28s} {'Precision':>9s} {'Recall':>8s} {'F1':>8s} {'ExactMatch':>11s}"
    ]
    for label, report, *marks in rows:
        suffix = f"  {marks[0]}" if marks and marks[0] else ""
        lines.append(f"{label:28s} {report.row()}{suffix}")
    return "\n".join(lines)
