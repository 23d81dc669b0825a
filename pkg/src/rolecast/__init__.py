"""Semantic role classification by analogical transfer over predicate-argument pairs."""

__version__ = "0.1.0"
