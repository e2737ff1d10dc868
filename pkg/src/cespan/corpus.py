"""Dataset ingestion, span location, and BIO label encoding/decoding.

A document carries a cause substring and an effect substring. We locate them
as character ranges, label whitespace- or parser-segmented words with the
five tags B-C, I-C, B-E, I-E, O, propagate labels onto subword tokens, and
invert predicted token tags back into substrings.
"""

from __future__ import annotations

import csv
import io
import json
import string
from dataclasses import dataclass, field

from .errors import CespanError

# Tag index order is load-bearing: Viterbi tie-breaking and every 5-way
# array in the model use these positions.
LABELS = ("B-C", "I-C", "B-E", "I-E", "O")
LABEL_INDEX = {t: i for i, t in enumerate(LABELS)}
COLLAPSE = {"B-C": "C", "I-C": "C", "B-E": "E", "I-E": "E", "O": "O"}

_PUNCT = set(string.punctuation)


class CorpusError(CespanError):
    pass


def collapse(tag: str) -> str:
    """Map a 5-way BIO tag to its span type: C, E or O."""
    try:
        return COLLAPSE[tag]
    except KeyError:
        raise CorpusError(f"unknown label tag {tag!r}") from None


@dataclass(frozen=True)
class RawExample:
    id: str
    text: str
    cause: str = ""
    effect: str = ""


@dataclass(frozen=True)
class Word:
    surface: str
    char_start: int
    char_end: int
    pos: str | None = None
    label: str = "O"

    def __post_init__(self):
        if not self.char_start < self.char_end:
            raise CorpusError(
                f"word {self.surface!r}: char_start {self.char_start} must be "
                f"< char_end {self.char_end}"
            )


@dataclass(frozen=True)
class LabeledExample:
    """A document with aligned word- and token-level labelings.

    ``tokens`` may be shorter than the full subword expansion when the
    sequence was truncated; words whose tokens were all dropped are scored
    as O downstream.
    """

    id: str
    text: str
    words: tuple[Word, ...]
    tokens: tuple[str, ...]
    token_to_word: tuple[int, ...]
    token_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.token_to_word) or len(self.tokens) != len(
            self.token_labels
        ):
            raise CorpusError(f"example {self.id}: token field lengths differ")
        prev = -1
        for t, w in enumerate(self.token_to_word):
            if w < prev:
                raise CorpusError(
                    f"example {self.id}: token_to_word not non-decreasing at token {t}"
                )
            if not 0 <= w < len(self.words):
                raise CorpusError(
                    f"example {self.id}: token {t} maps to invalid word index {w}"
                )
            prev = w

    def first_token_of_word(self, word_index: int) -> int | None:
        """Index of the word's first surviving token, or None if truncated away."""
        for t, w in enumerate(self.token_to_word):
            if w == word_index:
                return t
            if w > word_index:
                return None
        return None

    def word_labels(self) -> tuple[str, ...]:
        return tuple(w.label for w in self.words)


class PosVocab:
    """Dense tag -> index mapping, capped at ``capacity`` distinct tags."""

    def __init__(self, tags=(), capacity: int = 51):
        self.capacity = capacity
        self.tag_to_index: dict[str, int] = {}
        for tag in tags:
            self.add(tag)

    def add(self, tag: str) -> int:
        if tag not in self.tag_to_index:
            if len(self.tag_to_index) >= self.capacity:
                raise CorpusError(
                    f"POS vocabulary exceeds capacity {self.capacity}: "
                    f"cannot add {tag!r}"
                )
            self.tag_to_index[tag] = len(self.tag_to_index)
        return self.tag_to_index[tag]

    def lookup(self, tag: str | None) -> int | None:
        """Index of a tag, or None for tags unseen in training."""
        if tag is None:
            return None
        return self.tag_to_index.get(tag)

    def __len__(self):
        return len(self.tag_to_index)

    def to_dict(self) -> dict:
        return {"capacity": self.capacity, "tags": dict(self.tag_to_index)}

    @classmethod
    def from_dict(cls, d: dict) -> "PosVocab":
        vocab = cls(capacity=d["capacity"])
        for tag, idx in sorted(d["tags"].items(), key=lambda kv: kv[1]):
            if vocab.add(tag) != idx:
                raise CorpusError("POS vocabulary indices are not dense from 0")
        return vocab


# ---------------------------------------------------------------------------
# Dataset file
# ---------------------------------------------------------------------------

def parse_dataset(source, delimiter: str = ";") -> list[RawExample]:
    """Read a delimited dataset file into RawExamples.

    ``source`` is a path or an open text file. The header row must name
    Index and Text columns; Cause and Effect are optional (test splits omit
    them). All fields are whitespace-trimmed.
    """
    if hasattr(source, "read"):
        return _parse_dataset_file(source, delimiter)
    with open(source, "r", encoding="utf-8", newline="") as fh:
        return _parse_dataset_file(fh, delimiter)


def _parse_dataset_file(fh, delimiter: str) -> list[RawExample]:
    reader = csv.reader(fh, delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise CorpusError("dataset file is empty (header row required)") from None
    columns = {name.strip(): i for i, name in enumerate(header)}
    for required in ("Index", "Text"):
        if required not in columns:
            raise CorpusError(f"dataset header lacks required column {required!r}")

    examples: list[RawExample] = []
    seen: set[str] = set()
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) <= columns["Text"]:
            raise CorpusError(f"row {row_no}: too few fields ({len(row)})")

        def cell(name):
            i = columns.get(name)
            if i is None or i >= len(row):
                return ""
            return row[i].strip()

        ex_id = cell("Index")
        text = cell("Text")
        if not ex_id:
            raise CorpusError(f"row {row_no}: empty Index")
        if not text:
            raise CorpusError(f"row {row_no}: empty Text")
        if ex_id in seen:
            raise CorpusError(f"row {row_no}: duplicate id {ex_id!r}")
        seen.add(ex_id)
        examples.append(
            RawExample(id=ex_id, text=text, cause=cell("Cause"), effect=cell("Effect"))
        )
    return examples


def write_dataset(path, examples, delimiter: str = ";") -> None:
    """Write RawExamples in the same four-column format parse_dataset reads."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["Index", "Text", "Cause", "Effect"])
    for ex in examples:
        writer.writerow([ex.id, ex.text, ex.cause, ex.effect])
    from .ioutil import write_atomic_text

    write_atomic_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# Span location and BIO encoding
# ---------------------------------------------------------------------------

def _occurrences(text: str, sub: str) -> list[tuple[int, int]]:
    out = []
    start = text.find(sub)
    while start != -1:
        out.append((start, start + len(sub)))
        start = text.find(sub, start + 1)
    return out


def _disjoint(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[1] <= b[0] or b[1] <= a[0]


def locate_spans(ex: RawExample):
    """Character ranges of the cause and effect substrings.

    Each span takes its first occurrence. If the first occurrences overlap,
    later occurrences of the shorter span are tried in order; equal lengths
    treat the cause as the movable one. Empty spans yield None.

    Returns (cause_range, effect_range).
    """
    cause_occ = _occurrences(ex.text, ex.cause) if ex.cause else None
    effect_occ = _occurrences(ex.text, ex.effect) if ex.effect else None
    if ex.cause and not cause_occ:
        raise CorpusError(f"example {ex.id}: cause substring not found in text")
    if ex.effect and not effect_occ:
        raise CorpusError(f"example {ex.id}: effect substring not found in text")

    if cause_occ is None or effect_occ is None:
        return (
            cause_occ[0] if cause_occ else None,
            effect_occ[0] if effect_occ else None,
        )

    cause_range, effect_range = cause_occ[0], effect_occ[0]
    if _disjoint(cause_range, effect_range):
        return cause_range, effect_range

    if len(ex.cause) <= len(ex.effect):
        movable, fixed = cause_occ, effect_range
    else:
        movable, fixed = effect_occ, cause_range
    for candidate in movable[1:]:
        if _disjoint(candidate, fixed):
            if movable is cause_occ:
                return candidate, fixed
            return fixed, candidate
    raise CorpusError(
        f"example {ex.id}: no disjoint placement for overlapping cause/effect spans"
    )


def encode_bio(ex: RawExample, words) -> tuple[Word, ...]:
    """Label words against the located cause/effect ranges.

    A word belongs to a span when its character range intersects it; the
    first such word gets the B- tag, the rest I-. A word intersecting both
    ranges is an error (gold spans are disjoint).
    """
    cause_range, effect_range = locate_spans(ex)
    labels = ["O"] * len(words)

    def mark(rng, b_tag, i_tag):
        if rng is None:
            return
        first = True
        for i, w in enumerate(words):
            if w.char_start < rng[1] and w.char_end > rng[0]:
                if labels[i] != "O":
                    raise CorpusError(
                        f"example {ex.id}: word {w.surface!r} intersects both spans"
                    )
                labels[i] = b_tag if first else i_tag
                first = False

    mark(cause_range, "B-C", "I-C")
    mark(effect_range, "B-E", "I-E")
    return tuple(
        Word(w.surface, w.char_start, w.char_end, w.pos, label)
        for w, label in zip(words, labels)
    )


def align_to_tokens(
    ex_id: str,
    text: str,
    words,
    token_pieces,
    token_word_index,
    max_seq_len: int = 350,
) -> LabeledExample:
    """Propagate word labels onto subword tokens and truncate.

    Every piece of a word shares the word's label except that a B- tag is
    demoted to I- after the first piece. Tokens beyond ``max_seq_len`` are
    dropped.
    """
    if len(token_pieces) != len(token_word_index):
        raise CorpusError(f"example {ex_id}: token/word-index lengths differ")
    covered = set()
    token_labels = []
    for t, (piece, w_idx) in enumerate(zip(token_pieces, token_word_index)):
        if w_idx is None or not 0 <= w_idx < len(words):
            raise CorpusError(f"example {ex_id}: token {t} ({piece!r}) has no source word")
        label = words[w_idx].label
        if w_idx in covered and label.startswith("B-"):
            label = "I-" + label[2:]
        covered.add(w_idx)
        token_labels.append(label)
    if len(covered) != len(words):
        missing = sorted(set(range(len(words))) - covered)
        raise CorpusError(f"example {ex_id}: words without tokens: {missing}")

    return LabeledExample(
        id=ex_id,
        text=text,
        words=tuple(words),
        tokens=tuple(token_pieces[:max_seq_len]),
        token_to_word=tuple(token_word_index[:max_seq_len]),
        token_labels=tuple(token_labels[:max_seq_len]),
    )


def lift_to_words(ex: LabeledExample, token_tags) -> list[str]:
    """Word-level tags read from each word's first token; truncated words get O."""
    word_tags = []
    for w_idx in range(len(ex.words)):
        t = ex.first_token_of_word(w_idx)
        if t is None or t >= len(token_tags):
            word_tags.append("O")
        else:
            word_tags.append(token_tags[t])
    return word_tags


def decode_spans(ex: LabeledExample, predicted) -> tuple[str, str]:
    """Reconstruct (cause_text, effect_text) from predicted token tags.

    Tags are lifted to words via each word's first token, collapsed to
    {C, E, O}, and for each span type the longest contiguous run of words
    wins (ties go to the earliest run). A leading I- tag with no B- still
    opens a run. Missing spans come back as empty strings.
    """
    return spans_from_word_tags(ex, lift_to_words(ex, predicted))


def spans_from_word_tags(ex: LabeledExample, word_tags) -> tuple[str, str]:
    """decode_spans' word-level core: substrings from per-word tags."""
    if len(word_tags) != len(ex.words):
        raise CorpusError(
            f"example {ex.id}: {len(word_tags)} tags for {len(ex.words)} words"
        )
    collapsed = [collapse(t) for t in word_tags]

    def best_run(kind):
        best = None  # (length, start, end) with end exclusive
        i = 0
        while i < len(collapsed):
            if collapsed[i] == kind:
                j = i
                while j < len(collapsed) and collapsed[j] == kind:
                    j += 1
                if best is None or j - i > best[0]:
                    best = (j - i, i, j)
                i = j
            else:
                i += 1
        if best is None:
            return ""
        _, i, j = best
        return ex.text[ex.words[i].char_start : ex.words[j - 1].char_end]

    return best_run("C"), best_run("E")


# ---------------------------------------------------------------------------
# Word segmentation
# ---------------------------------------------------------------------------

def segment_words(text: str) -> list[Word]:
    """Whitespace segmentation with leading/trailing punctuation split off.

    The fallback used when no dependency parse supplies the segmentation;
    a parse's own tokenization always takes precedence.
    """
    words: list[Word] = []
    i = 0
    n = len(text)
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        j = i
        while j < n and not text[j].isspace():
            j += 1
        words.extend(_split_punct(text, i, j))
        i = j
    return words


def _split_punct(text: str, start: int, end: int) -> list[Word]:
    lead = start
    while lead < end and text[lead] in _PUNCT:
        lead += 1
    trail = end
    while trail > lead and text[trail - 1] in _PUNCT:
        trail -= 1
    out = [Word(text[k], k, k + 1) for k in range(start, lead)]
    if lead < trail:
        out.append(Word(text[lead:trail], lead, trail))
    out.extend(Word(text[k], k, k + 1) for k in range(trail, end))
    return out


def words_from_forms(text: str, forms, pos_tags=None) -> list[Word]:
    """Align parser word forms against the raw text, in order.

    Used when a dependency parse (whose segmentation is authoritative)
    provides the word sequence without character offsets.
    """
    words = []
    cursor = 0
    for i, form in enumerate(forms):
        idx = text.find(form, cursor)
        if idx == -1:
            raise CorpusError(
                f"parse word {form!r} (#{i}) not found in text after offset {cursor}"
            )
        words.append(
            Word(form, idx, idx + len(form), pos_tags[i] if pos_tags else None)
        )
        cursor = idx + len(form)
    return words


# ---------------------------------------------------------------------------
# Tokenization JSON lines
# ---------------------------------------------------------------------------

def read_tokenization(source) -> dict[str, dict]:
    """Read a tokenization file: one JSON object per line, keyed by id.

    Each object holds words [{surface,start,end,pos}] and tokens
    [{piece, word_index}].
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    entries: dict[str, dict] = {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"tokenization line {line_no}: invalid JSON ({e})") from None
        for key in ("id", "words", "tokens"):
            if key not in obj:
                raise CorpusError(f"tokenization line {line_no}: missing {key!r}")
        if obj["id"] in entries:
            raise CorpusError(f"tokenization line {line_no}: duplicate id {obj['id']!r}")
        entries[obj["id"]] = obj
    return entries


def tokenization_to_words(entry) -> list[Word]:
    return [
        Word(w["surface"], w["start"], w["end"], w.get("pos"))
        for w in entry["words"]
    ]


def whitespace_tokenization(words) -> tuple[list[str], list[int]]:
    """Built-in degenerate tokenizer: one token per word."""
    return [w.surface for w in words], list(range(len(words)))
