"""Toolkit for evaluating the faithfulness of book-length summaries."""

__version__ = "0.1.0"
