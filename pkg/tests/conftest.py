import io

import numpy as np
import pytest

from cespan import corpus, depgraph, model, pipeline, synth
from cespan.blas import pin_blas_single_thread

pin_blas_single_thread()


@pytest.fixture(scope="session")
def tiny_config():
    """Small but fully wired model: every layer on, fast to train."""
    return model.ModelConfig(
        d_bert=16, d_pos=6, gnn_hidden=12, d_gnn=8, bilstm_out=8,
        epochs=2, batch_size=4, base_lr=1e-3, dropout=0.1,
    )


@pytest.fixture(scope="session")
def synth_docs():
    return synth.make_corpus(24, seed=9)


@pytest.fixture(scope="session")
def assembled_docs(synth_docs):
    raw = corpus.parse_dataset(io.StringIO(synth.corpus_csv(synth_docs)))
    parses = depgraph.parse_conllu(io.StringIO(synth.corpus_conllu(synth_docs)))
    return pipeline.assemble(raw, parses, None, 350)


@pytest.fixture(scope="session")
def prepared_docs(assembled_docs, tiny_config):
    vocab = pipeline.build_pos_vocab(assembled_docs, capacity=tiny_config.d_pos)
    provider = model.HashedEmbeddings(tiny_config.d_bert)
    return pipeline.prepare(assembled_docs, provider, tiny_config, vocab)
