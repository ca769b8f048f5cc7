"""Hierarchical context attention for semantic segmentation, in numpy."""

__version__ = "0.1.0"
