"""SliceScope - coherent error slice discovery from embeddings and losses."""

__version__ = "0.1.0"
