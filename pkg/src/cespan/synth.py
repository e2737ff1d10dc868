"""Synthetic corpora: planted cause/effect patterns with consistent parses.

Two generators live here. ``make_corpus`` plants strongly learnable
cause/effect sentences (dedicated vocabularies per span role, cue words,
deterministic dependency trees) for overfit and end-to-end tests.
``random_document`` produces adversarial word soups with word-aligned
spans for round-trip checking.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .corpus import RawExample, Word, encode_bio, locate_spans, segment_words
from .depgraph import write_conllu_doc

CAUSE_HEAD = ("drought", "tariffs", "inflation", "sanctions", "strikes", "flooding")
CAUSE_TAIL = ("pressures", "shortages", "levies", "disruption", "volatility", "curbs")
EFFECT_HEAD = ("prices", "shares", "exports", "profits", "margins", "revenues")
EFFECT_TAIL = ("rose", "fell", "slumped", "surged", "steadied", "recovered")
FILLER = ("analysts", "officials", "traders", "regulators", "investors", "markets")
CUES = ("because", "since", "after", "following")

POS_BY_ROLE = {
    "cause_head": "NN",
    "cause_tail": "NNS",
    "effect_head": "NNS",
    "effect_tail": "VBD",
    "filler": "NNP",
    "cue": "IN",
    ",": ",",
    ".": ".",
}


@dataclass
class SynthDoc:
    example: RawExample
    sentences: list[list[tuple[str, str]]]  # per sentence: (surface, role)

    def conllu_rows(self):
        """Deterministic parse: span-continuation words attach to their span
        head, everything else to the sentence root (the cue when present)."""
        out = []
        for sentence in self.sentences:
            roles = [role for _, role in sentence]
            if "cue" in roles:
                root = roles.index("cue")
            else:
                root = 0
            rows = []
            span_start = None
            for i, (surface, role) in enumerate(sentence):
                pos = POS_BY_ROLE[role]
                if role in ("cause_head", "effect_head"):
                    span_start = i
                    head = 0 if i == root else root + 1
                    rel = "nsubj"
                elif role in ("cause_tail", "effect_tail"):
                    head = span_start + 1
                    rel = "dep"
                elif i == root:
                    head = 0
                    rel = "root"
                else:
                    head = root + 1
                    rel = "punct" if role in (",", ".") else "dep"
                rows.append((surface, pos, pos, head, rel))
            out.append(rows)
        return out


def _span(rng, head_pool, tail_pool, max_extra=2):
    words = [head_pool[rng.integers(len(head_pool))]]
    for _ in range(int(rng.integers(1, max_extra + 1))):
        words.append(tail_pool[rng.integers(len(tail_pool))])
    return words


def make_corpus(n_examples: int, seed: int = 0, multi_sentence_rate: float = 0.2):
    """Planted-pattern documents; label is a function of word identity plus
    position, so a correctly wired model can drive training loss to zero."""
    rng = np.random.default_rng(seed)
    docs: list[SynthDoc] = []
    for i in range(n_examples):
        cause = _span(rng, CAUSE_HEAD, CAUSE_TAIL)
        effect = _span(rng, EFFECT_HEAD, EFFECT_TAIL)
        cue = CUES[rng.integers(len(CUES))]
        template = int(rng.integers(2))
        sentence: list[tuple[str, str]] = []
        if template == 0:
            # effect, cue, cause.
            sentence += [(w, "effect_head" if k == 0 else "effect_tail")
                         for k, w in enumerate(effect)]
            sentence.append((cue, "cue"))
            sentence += [(w, "cause_head" if k == 0 else "cause_tail")
                         for k, w in enumerate(cause)]
        else:
            # cue, cause, comma, effect.
            sentence.append((cue, "cue"))
            sentence += [(w, "cause_head" if k == 0 else "cause_tail")
                         for k, w in enumerate(cause)]
            sentence.append((",", ","))
            sentence += [(w, "effect_head" if k == 0 else "effect_tail")
                         for k, w in enumerate(effect)]
        sentence.append((".", "."))
        sentences = [sentence]
        if rng.random() < multi_sentence_rate:
            extra = [
                (FILLER[rng.integers(len(FILLER))], "filler"),
                (FILLER[rng.integers(len(FILLER))], "filler"),
                (".", "."),
            ]
            sentences.append(extra)

        tokens = [s for sent in sentences for s, _ in sent]
        text = _join_tokens(tokens)
        docs.append(
            SynthDoc(
                example=RawExample(
                    id=f"{i:04d}.{i % 7}",
                    text=text,
                    cause=" ".join(cause),
                    effect=" ".join(effect),
                ),
                sentences=sentences,
            )
        )
    return docs


def _join_tokens(tokens) -> str:
    """Space-joined, except punctuation glues to the previous token."""
    parts = []
    for tok in tokens:
        if tok in (",", ".") and parts:
            parts[-1] += tok
        else:
            parts.append(tok)
    return " ".join(parts)


def corpus_csv(docs) -> str:
    lines = ["Index;Text;Cause;Effect"]
    for doc in docs:
        ex = doc.example
        lines.append(f"{ex.id};{ex.text};{ex.cause};{ex.effect}")
    return "\n".join(lines) + "\n"


def corpus_conllu(docs) -> str:
    buf = io.StringIO()
    for doc in docs:
        write_conllu_doc(buf, doc.example.id, doc.conllu_rows())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Randomized round-trip documents
# ---------------------------------------------------------------------------

_RT_VOCAB = None


def _rt_vocab():
    global _RT_VOCAB
    if _RT_VOCAB is None:
        gen = np.random.default_rng(1234)
        letters = "abcdefghijklmnopqrstuvwxyz"
        _RT_VOCAB = [
            "".join(letters[j] for j in gen.integers(0, 26, size=gen.integers(1, 8)))
            for _ in range(60)
        ]
    return _RT_VOCAB


def random_document(rng: np.random.Generator, max_words: int = 24) -> RawExample:
    """Random words (duplicates encouraged) with disjoint word-aligned spans.

    Rejection-samples until the spans, as located by first-occurrence
    logic, land exactly on word boundaries; only such documents are
    round-trippable by construction.
    """
    vocab = _rt_vocab()
    for _ in range(1000):
        n = int(rng.integers(1, max_words + 1))
        words = [vocab[rng.integers(len(vocab))] for _ in range(n)]
        if rng.random() < 0.3:
            words.append(".")
        text = " ".join(words)

        spans = sorted(rng.choice(len(words) + 1, size=4, replace=True))
        c_lo, c_hi, e_lo, e_hi = spans
        if rng.random() < 0.5:
            c_lo, c_hi, e_lo, e_hi = e_lo, e_hi, c_lo, c_hi  # effect first
        cause = " ".join(words[c_lo:c_hi])
        effect = " ".join(words[e_lo:e_hi])
        if rng.random() < 0.1:
            cause = ""
        if rng.random() < 0.1:
            effect = ""
        ex = RawExample(id="rt", text=text, cause=cause, effect=effect)
        segmented = segment_words(text)
        try:
            c_rng, e_rng = locate_spans(ex)
            encode_bio(ex, segmented)
        except Exception:
            continue
        boundaries_start = {w.char_start for w in segmented}
        boundaries_end = {w.char_end for w in segmented}
        ok = True
        for span in (c_rng, e_rng):
            if span is not None and (
                span[0] not in boundaries_start or span[1] not in boundaries_end
            ):
                ok = False
        if ok:
            return ex
    raise RuntimeError("could not sample a round-trippable document")


def random_subword_split(rng: np.random.Generator, words) -> tuple[list[str], list[int]]:
    """Split each word into 1-3 pieces (## marks continuations)."""
    pieces: list[str] = []
    owner: list[int] = []
    for w_idx, word in enumerate(words):
        surface = word.surface if isinstance(word, Word) else word
        n_pieces = int(rng.integers(1, 4))
        n_pieces = min(n_pieces, len(surface))
        cuts = sorted(rng.choice(range(1, len(surface)), size=n_pieces - 1, replace=False)) if n_pieces > 1 else []
        prev = 0
        for k, cut in enumerate(list(cuts) + [len(surface)]):
            piece = surface[prev:cut]
            pieces.append(piece if k == 0 else "##" + piece)
            owner.append(w_idx)
            prev = cut
    return pieces, owner
