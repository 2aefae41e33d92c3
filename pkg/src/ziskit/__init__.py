"""Zero-interaction security toolkit: context schemes plus their evaluation."""

__version__ = "0.1.0"
