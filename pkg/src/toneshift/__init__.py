"""Emotional tone pipeline: corpus, segment selection, scoring, model, serving."""

__version__ = "0.1.0"
