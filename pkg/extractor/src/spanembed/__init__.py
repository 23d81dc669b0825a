"""Offline contextual span-embedding extractor for AEMB stores."""

__version__ = "0.1.0"
