"""Assembly of raw files into model-ready examples, and the predict path.

Word segmentation precedence: an explicit tokenization file wins, then the
dependency parse's own word forms, then whitespace splitting with
punctuation peeled off. Tokens default to one per word unless the
tokenization file brings subword pieces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import corpus, depgraph, model, viterbi
from .corpus import LabeledExample, LABEL_INDEX, PosVocab, Word
from .depgraph import DocParse, TokenGraph
from .errors import CespanError
from .model import ModelConfig, PreparedExample
from .ndcore import log_softmax_values


class PipelineError(CespanError):
    pass


@dataclass
class AssembledDoc:
    """A labeled example plus its token graph, before tensors."""

    labeled: LabeledExample
    graph: TokenGraph
    parse: DocParse | None


def assemble(
    raw_examples,
    parses: dict | None = None,
    tokenizations: dict | None = None,
    max_seq_len: int = 350,
    require_parse: bool = False,
) -> list[AssembledDoc]:
    """Join dataset rows with their parses/tokenizations into labeled docs."""
    docs = []
    missing_parses = []
    for ex in raw_examples:
        parse = parses.get(ex.id) if parses else None
        if parse is None and require_parse:
            missing_parses.append(ex.id)
            continue
        tok_entry = tokenizations.get(ex.id) if tokenizations else None
        docs.append(_assemble_one(ex, parse, tok_entry, max_seq_len))
    if missing_parses:
        raise PipelineError(
            f"{len(missing_parses)} examples lack parses, e.g. {missing_parses[:5]}"
        )
    return docs


def _assemble_one(ex, parse, tok_entry, max_seq_len) -> AssembledDoc:
    if tok_entry is not None:
        words = corpus.tokenization_to_words(tok_entry)
        pieces = [t["piece"] for t in tok_entry["tokens"]]
        piece_words = [t["word_index"] for t in tok_entry["tokens"]]
        if parse is not None and len(parse.forms) != len(words):
            raise PipelineError(
                f"example {ex.id}: parse has {len(parse.forms)} words, "
                f"tokenization has {len(words)}"
            )
    elif parse is not None:
        words = corpus.words_from_forms(ex.text, parse.forms, parse.pos)
        pieces, piece_words = corpus.whitespace_tokenization(words)
    else:
        words = corpus.segment_words(ex.text)
        pieces, piece_words = corpus.whitespace_tokenization(words)

    if ex.cause or ex.effect:
        words = corpus.encode_bio(ex, words)
    labeled = corpus.align_to_tokens(
        ex.id, ex.text, words, pieces, piece_words, max_seq_len
    )

    if parse is not None:
        arcs = depgraph.restrict_arcs_to_tokens(parse.arcs, labeled.token_to_word)
        graph = depgraph.build_token_graph(
            arcs, labeled.token_to_word, len(labeled.words)
        )
    else:
        graph = TokenGraph(len(labeled.tokens), np.zeros((0, 2), dtype=np.int32))
    return AssembledDoc(labeled=labeled, graph=graph, parse=parse)


def build_pos_vocab(docs, capacity: int = 51) -> PosVocab:
    """POS tags seen in training, in first-appearance order."""
    vocab = PosVocab(capacity=capacity)
    for doc in docs:
        for word in doc.labeled.words:
            if word.pos is not None:
                vocab.add(word.pos)
    return vocab


def prepare(
    docs,
    provider,
    config: ModelConfig,
    pos_vocab: PosVocab | None,
) -> list[PreparedExample]:
    """Attach embeddings, POS indices and graph arrays to assembled docs."""
    if config.use_pos and pos_vocab is None:
        raise PipelineError("use_pos requires a POS vocabulary")
    if provider.dim != config.d_bert:
        raise PipelineError(
            f"embedding dim {provider.dim} != config d_bert {config.d_bert}"
        )
    out = []
    for doc in docs:
        labeled = doc.labeled
        graph = doc.graph.symmetrized() if config.symmetrize_edges else doc.graph
        emb = provider.matrix(labeled)
        if pos_vocab is not None:
            pos_indices = np.array(
                [
                    -1
                    if (idx := pos_vocab.lookup(labeled.words[w].pos)) is None
                    else idx
                    for w in labeled.token_to_word
                ],
                dtype=np.int64,
            )
        else:
            pos_indices = None
        targets = np.array(
            [LABEL_INDEX[t] for t in labeled.token_labels], dtype=np.int64
        )
        first_tokens = []
        seen = set()
        for t, w in enumerate(labeled.token_to_word):
            if w not in seen:
                seen.add(w)
                first_tokens.append(t)
        out.append(
            PreparedExample(
                ex=labeled,
                emb=emb,
                pos_indices=pos_indices,
                src=graph.src().astype(np.int64),
                dst=graph.dst().astype(np.int64),
                indeg=graph.in_degrees(),
                targets=targets,
                word_first_token=np.array(first_tokens, dtype=np.int64),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

@dataclass
class Prediction:
    id: str
    cause: str
    effect: str
    word_tags: list[str]
    token_tags: list[str]


def predict_example(
    prepared: PreparedExample,
    params,
    config: ModelConfig,
    tm: viterbi.TransitionModel | None,
    token_level: bool = False,
) -> Prediction:
    """Decode one example: Viterbi-corrected unless ``tm`` is None (raw argmax).

    Viterbi runs over word-level emissions (each word's first token) by
    default; ``token_level`` switches to decoding the full piece sequence.
    Words whose tokens were truncated away get O.
    """
    logits = model.predict_logits(prepared, params, config)
    log_probs = log_softmax_values(logits.astype(np.float64))
    labeled = prepared.ex

    if tm is None:
        token_tags = [corpus.LABELS[i] for i in logits.argmax(axis=1)]
        word_tags = corpus.lift_to_words(labeled, token_tags)
    elif token_level:
        token_tags = viterbi.decode(log_probs, tm)
        word_tags = corpus.lift_to_words(labeled, token_tags)
    else:
        emissions = log_probs[prepared.word_first_token]
        decoded = viterbi.decode(emissions, tm)
        word_tags = decoded + ["O"] * (len(labeled.words) - len(decoded))
        token_tags = [word_tags[w] for w in labeled.token_to_word]

    cause, effect = corpus.spans_from_word_tags(labeled, word_tags)
    return Prediction(
        id=labeled.id,
        cause=cause,
        effect=effect,
        word_tags=word_tags,
        token_tags=list(token_tags),
    )


def gold_word_tags(labeled: LabeledExample) -> list[str]:
    return [w.label for w in labeled.words]
