"""Viterbi correction of per-token label probabilities.

The classifier emits tokenwise distributions that can form illegal BIO
sequences (an I- tag right after O, say). Decoding against a transition
model with a hard structural mask repairs those, acting as forward error
correction on the label stream. Transitions are estimated from gold-label
bigrams; a brute-force enumeration decoder doubles as the test oracle.
"""

from __future__ import annotations

import json

import numpy as np

from . import kernels
from .corpus import LABELS, LABEL_INDEX
from .errors import CespanError

NEG_INF = float("-inf")


class ViterbiError(CespanError):
    pass


def _structural_masks():
    k = len(LABELS)
    start = np.zeros(k, dtype=bool)
    trans = np.zeros((k, k), dtype=bool)
    b_c, i_c, b_e, i_e, o = (LABEL_INDEX[t] for t in ("B-C", "I-C", "B-E", "I-E", "O"))
    start[[b_c, b_e, o]] = True
    trans[:, :] = True
    trans[o, i_c] = False
    trans[o, i_e] = False
    for c_tag in (b_c, i_c):
        trans[c_tag, i_e] = False
    for e_tag in (b_e, i_e):
        trans[e_tag, i_c] = False
    return start, trans


ALLOWED_START, ALLOWED_TRANS = _structural_masks()


class TransitionModel:
    """Start and bigram log-probabilities over the five tags.

    Structurally impossible cells (I- after O, span-type switches without a
    B-, I- starts) are forced to -inf regardless of the data.
    """

    def __init__(self, log_start: np.ndarray, log_trans: np.ndarray):
        log_start = np.asarray(log_start, dtype=np.float64)
        log_trans = np.asarray(log_trans, dtype=np.float64)
        k = len(LABELS)
        if log_start.shape != (k,) or log_trans.shape != (k, k):
            raise ViterbiError(
                f"bad transition shapes {log_start.shape}, {log_trans.shape}"
            )
        if np.any(np.isfinite(log_start[~ALLOWED_START])) or np.any(
            np.isfinite(log_trans[~ALLOWED_TRANS])
        ):
            raise ViterbiError("finite probability on a structurally forbidden cell")
        self.log_start = log_start
        self.log_trans = log_trans

    def to_json(self) -> str:
        def encode(arr):
            return [
                [None if v == NEG_INF else float(v) for v in row]
                for row in np.atleast_2d(arr)
            ]

        return json.dumps(
            {
                "labels": list(LABELS),
                "start": encode(self.log_start)[0],
                "trans": encode(self.log_trans),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "TransitionModel":
        obj = json.loads(text)
        if obj.get("labels") != list(LABELS):
            raise ViterbiError("transition dump has unexpected label order")

        def decode(rows):
            return np.asarray(
                [[NEG_INF if v is None else v for v in row] for row in rows],
                dtype=np.float64,
            )

        return cls(decode([obj["start"]])[0], decode(obj["trans"]))


def estimate_transitions(sequences) -> TransitionModel:
    """Fit the transition model from gold tag sequences.

    Counts starts and bigrams, applies add-one smoothing to structurally
    allowed cells only, then row-normalizes in log space. Bigrams that are
    structurally forbidden (possible only in noisy data) are ignored.
    """
    k = len(LABELS)
    start_counts = np.zeros(k, dtype=np.float64)
    trans_counts = np.zeros((k, k), dtype=np.float64)
    n_sequences = 0
    for seq in sequences:
        tags = [LABEL_INDEX[t] for t in seq]
        if not tags:
            continue
        n_sequences += 1
        if ALLOWED_START[tags[0]]:
            start_counts[tags[0]] += 1
        for prev, cur in zip(tags, tags[1:]):
            if ALLOWED_TRANS[prev, cur]:
                trans_counts[prev, cur] += 1
    if n_sequences == 0:
        raise ViterbiError("cannot estimate transitions from an empty corpus")

    log_start = np.full(k, NEG_INF)
    smoothed = start_counts[ALLOWED_START] + 1.0
    log_start[ALLOWED_START] = np.log(smoothed / smoothed.sum())

    log_trans = np.full((k, k), NEG_INF)
    for row in range(k):
        allowed = ALLOWED_TRANS[row]
        smoothed = trans_counts[row, allowed] + 1.0
        log_trans[row, allowed] = np.log(smoothed / smoothed.sum())
    return TransitionModel(log_start, log_trans)


def decode(log_emissions: np.ndarray, tm: TransitionModel) -> list[str]:
    """Best tag sequence under emissions + transitions.

    Ties resolve to the lexicographically smallest tag-index sequence among
    the maximal-score paths, matching brute_force_decode exactly.
    """
    log_emissions = np.ascontiguousarray(log_emissions, dtype=np.float64)
    if log_emissions.ndim != 2 or log_emissions.shape[1] != len(LABELS):
        raise ViterbiError(f"emissions shape {log_emissions.shape} != (n, {len(LABELS)})")
    if log_emissions.shape[0] == 0:
        raise ViterbiError("cannot decode an empty sequence")
    path, score = kernels.viterbi_path(log_emissions, tm.log_start, tm.log_trans)
    if not np.isfinite(score):
        raise ViterbiError("every path has -inf score")
    return [LABELS[i] for i in path]


def brute_force_decode(log_emissions: np.ndarray, tm: TransitionModel) -> list[str]:
    """Exact argmax by enumerating all 5^n paths (test oracle, n <= 10).

    Paths are enumerated in lexicographic tag-index order and argmax keeps
    the first maximum, which realizes the tie-break directly.
    """
    log_emissions = np.asarray(log_emissions, dtype=np.float64)
    n, k = log_emissions.shape
    if n > 10:
        raise ViterbiError(f"brute force limited to n <= 10, got {n}")
    if n == 0:
        raise ViterbiError("cannot decode an empty sequence")
    total = k**n
    idx = np.arange(total)
    prev_digits = None
    scores = np.zeros(total, dtype=np.float64)
    for t in range(n):
        digits = (idx // k ** (n - 1 - t)) % k
        scores += log_emissions[t, digits]
        if t == 0:
            scores += tm.log_start[digits]
        else:
            scores += tm.log_trans[prev_digits, digits]
        prev_digits = digits
    best = int(np.argmax(scores))
    if not np.isfinite(scores[best]):
        raise ViterbiError("every path has -inf score")
    path = [(best // k ** (n - 1 - t)) % k for t in range(n)]
    return [LABELS[i] for i in path]


def path_score(tags, log_emissions: np.ndarray, tm: TransitionModel) -> float:
    """Score of one explicit tag sequence (for tests and inspection)."""
    ids = [LABEL_INDEX[t] for t in tags]
    score = tm.log_start[ids[0]] + log_emissions[0, ids[0]]
    for t in range(1, len(ids)):
        score += tm.log_trans[ids[t - 1], ids[t]] + log_emissions[t, ids[t]]
    return float(score)


def violates_mask(tags) -> bool:
    """True when a tag sequence breaks a structural BIO constraint."""
    ids = [LABEL_INDEX[t] for t in tags]
    if not ALLOWED_START[ids[0]]:
        return True
    return any(
        not ALLOWED_TRANS[prev, cur] for prev, cur in zip(ids, ids[1:])
    )
