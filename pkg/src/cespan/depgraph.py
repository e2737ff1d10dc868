"""Dependency parses as directed token graphs.

CoNLL-U parses come in with word-level head->tail arcs; the model wants a
graph over subword token indices, so every word arc is expanded across all
(head piece, tail piece) pairs. Parses are per sentence, which leaves
multi-sentence documents as disconnected graphs by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import collapse
from .errors import CespanError


class DepGraphError(CespanError):
    pass


@dataclass(frozen=True)
class DepArc:
    head: int  # word index, 0-based within the document
    tail: int
    relation: str = ""

    def __post_init__(self):
        if self.head == self.tail:
            raise DepGraphError(f"self-attaching arc at word {self.head}")


@dataclass(frozen=True)
class DocParse:
    """One document's parse: word forms/POS plus arcs over a shared index space."""

    forms: tuple[str, ...]
    pos: tuple[str, ...]
    arcs: tuple[DepArc, ...]
    sentence_bounds: tuple[tuple[int, int], ...]  # [start, end) word ranges

    @property
    def n_sentences(self) -> int:
        return len(self.sentence_bounds)


@dataclass(frozen=True)
class TokenGraph:
    n_nodes: int
    edges: np.ndarray  # (E, 2) int32, rows (src, dst), head -> tail

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int32).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n_nodes:
                raise DepGraphError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise DepGraphError("self-loop in token graph")

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def src(self) -> np.ndarray:
        return self.edges[:, 0]

    def dst(self) -> np.ndarray:
        return self.edges[:, 1]

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.dst(), minlength=self.n_nodes).astype(np.int64)

    def symmetrized(self) -> "TokenGraph":
        """Same graph with reversed duplicates of every edge (deduplicated)."""
        if not self.n_edges:
            return self
        both = np.vstack([self.edges, self.edges[:, ::-1]])
        return TokenGraph(self.n_nodes, _dedup_sorted(both))

    def n_weak_components(self) -> int:
        parent = list(range(self.n_nodes))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for s, d in self.edges:
            ra, rb = find(int(s)), find(int(d))
            if ra != rb:
                parent[ra] = rb
        return len({find(v) for v in range(self.n_nodes)})

    def to_json(self) -> str:
        return json.dumps(
            {"n_nodes": self.n_nodes, "edges": self.edges.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "TokenGraph":
        obj = json.loads(text)
        edges = np.asarray(obj["edges"], dtype=np.int32).reshape(-1, 2)
        return cls(obj["n_nodes"], edges)


def _dedup_sorted(edges: np.ndarray) -> np.ndarray:
    """Unique rows in (src, dst) order; gives arc-order independence."""
    if edges.size == 0:
        return edges.reshape(0, 2).astype(np.int32)
    return np.unique(edges.astype(np.int32), axis=0)


# ---------------------------------------------------------------------------
# CoNLL-U reading
# ---------------------------------------------------------------------------

def parse_conllu(source) -> dict[str | None, DocParse]:
    """Parse CoNLL-U text into per-document parses.

    Documents are delimited by ``# newdoc id = <id>`` comments; files
    without them yield a single parse under key None. HEAD is 1-based with
    0 for the root; root attachments produce no arc. Multi-word token lines
    (ranges) and empty nodes (decimal ids) are skipped.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()

    docs: dict[str | None, DocParse] = {}
    current_id: str | None = None
    saw_doc_comment = False
    forms: list[str] = []
    pos: list[str] = []
    arcs: list[DepArc] = []
    bounds: list[tuple[int, int]] = []
    sent_rows: list[tuple[int, str, str, int, str]] = []  # (line_no, form, pos, head, rel)

    def flush_sentence():
        nonlocal sent_rows
        if not sent_rows:
            return
        offset = len(forms)
        n = len(sent_rows)
        for k, (line_no, form, tag, head, rel) in enumerate(sent_rows):
            if head < 0 or head > n:
                raise DepGraphError(
                    f"line {line_no}: HEAD {head} out of range for a "
                    f"{n}-word sentence"
                )
            if head == k + 1:
                raise DepGraphError(f"line {line_no}: word attaches to itself")
        for k, (line_no, form, tag, head, rel) in enumerate(sent_rows):
            forms.append(form)
            pos.append(tag)
            if head != 0:
                arcs.append(DepArc(head=offset + head - 1, tail=offset + k, relation=rel))
        bounds.append((offset, offset + n))
        sent_rows = []

    def flush_doc():
        flush_sentence()
        if forms or current_id is not None:
            if current_id in docs:
                raise DepGraphError(f"duplicate document id {current_id!r}")
            docs[current_id] = DocParse(
                tuple(forms), tuple(pos), tuple(arcs), tuple(bounds)
            )
        forms.clear()
        pos.clear()
        arcs.clear()
        bounds.clear()

    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            flush_sentence()
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if body.startswith("newdoc id") and "=" in body:
                if saw_doc_comment or forms or sent_rows:
                    flush_doc()
                saw_doc_comment = True
                current_id = body.split("=", 1)[1].strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise DepGraphError(
                f"line {line_no}: expected 10 tab-separated columns, got {len(cols)}"
            )
        token_id = cols[0]
        if "-" in token_id or "." in token_id:
            continue  # multi-word token range / empty node
        try:
            head = int(cols[6])
        except ValueError:
            raise DepGraphError(
                f"line {line_no}: non-integer HEAD {cols[6]!r}"
            ) from None
        tag = cols[4] if cols[4] != "_" else cols[3]
        sent_rows.append((line_no, cols[1], tag, head, cols[7]))

    flush_doc()
    return docs


def write_conllu_doc(fh, doc_id: str, sentences) -> None:
    """Emit one document: ``sentences`` is a list of rows
    (form, upos, xpos, head, deprel) per sentence, HEAD 1-based/0=root."""
    fh.write(f"# newdoc id = {doc_id}\n")
    for sentence in sentences:
        for i, (form, upos, xpos, head, rel) in enumerate(sentence, start=1):
            fh.write(
                f"{i}\t{form}\t_\t{upos}\t{xpos}\t_\t{head}\t{rel}\t_\t_\n"
            )
        fh.write("\n")


# ---------------------------------------------------------------------------
# Token graph construction
# ---------------------------------------------------------------------------

def word_token_map(token_to_word, n_words: int) -> list[list[int]]:
    tokens_of = [[] for _ in range(n_words)]
    for t, w in enumerate(token_to_word):
        tokens_of[w].append(t)
    return tokens_of


def build_token_graph(arcs, token_to_word, n_words: int) -> TokenGraph:
    """Expand word arcs over subword pieces: each head piece connects to
    each tail piece. Duplicate edges collapse to one."""
    n_tokens = len(token_to_word)
    tokens_of = word_token_map(token_to_word, n_words)
    pairs = []
    for arc in arcs:
        heads = tokens_of[arc.head]
        tails = tokens_of[arc.tail]
        if not heads or not tails:
            missing = arc.head if not heads else arc.tail
            raise DepGraphError(f"arc references word {missing} with no tokens")
        for i in heads:
            for j in tails:
                pairs.append((i, j))
    edges = _dedup_sorted(np.asarray(pairs, dtype=np.int32).reshape(-1, 2))
    return TokenGraph(n_tokens, edges)


def restrict_arcs_to_tokens(arcs, token_to_word) -> list[DepArc]:
    """Drop arcs whose head or tail word lost all tokens to truncation."""
    surviving = set(token_to_word)
    return [a for a in arcs if a.head in surviving and a.tail in surviving]


def homophily_score(graph: TokenGraph, node_labels) -> float:
    """Fraction of edges whose endpoints share a collapsed {C,E,O} label."""
    if graph.n_edges == 0:
        raise DepGraphError("homophily undefined: graph has zero edges")
    if len(node_labels) != graph.n_nodes:
        raise DepGraphError(
            f"got {len(node_labels)} labels for {graph.n_nodes} nodes"
        )
    lab = [collapse(t) if t not in ("C", "E", "O") else t for t in node_labels]
    same = sum(1 for s, d in graph.edges if lab[int(s)] == lab[int(d)])
    return same / graph.n_edges
