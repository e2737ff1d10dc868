"""Cause-effect span detection pipeline.

BIO token classification over contextual + POS features enriched with
dependency-graph embeddings (two SAGE layers and a BiLSTM), decoded with a
Viterbi error-correction pass, plus the cross-validation and significance
harness used to compare model variants.
"""

__version__ = "0.1.0"
