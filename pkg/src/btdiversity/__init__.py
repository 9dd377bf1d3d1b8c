"""Lexical and syntactic diversity metrics for sets of candidate translations."""

__version__ = "0.1.0"
