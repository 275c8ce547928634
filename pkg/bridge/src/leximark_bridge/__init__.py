"""HTTP bridge exposing a causal LM, an embedding model, and masked-LM
lexical substitution behind the watermarking toolkit's provider protocol."""

__version__ = "0.1.0"
