"""Cascade-size and comment-influence analytics for discussion threads carrying URLs."""

__version__ = "0.1.0"
