"""Change-aware file-level defect prediction pipeline."""

__version__ = "0.1.0"
