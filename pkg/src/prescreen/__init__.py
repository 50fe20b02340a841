"""Pre-task participant screening toolkit for crowdsourced GUI pointing experiments."""

__version__ = "0.1.0"
