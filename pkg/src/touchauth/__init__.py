"""Multi-modal touch + phone-movement user verification."""

__version__ = "0.1.0"
