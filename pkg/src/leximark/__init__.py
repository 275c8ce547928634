"""Corpus watermarking via high-entropy synonym substitution, plus
membership-inference scoring and dataset-level detection of whether
the watermarked text was used to train a language model."""

__version__ = "0.1.0"
