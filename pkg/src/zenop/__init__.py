"""Design and operation of zero-emission neighbourhood energy systems."""

__version__ = "0.1.0"
