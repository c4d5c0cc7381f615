"""Radiology entity normalization: lexicon ingestion, mention expansion,
BM25 candidate generation, pluggable ranking, and evaluation."""

__version__ = "0.1.0"
