"""Vision-language segmentation transfer toolkit for medical images."""

__version__ = "0.1.0"
