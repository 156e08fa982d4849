"""Self-contained CNN engine for seven-class skin-lesion classification."""

from .network import CLASS_NAMES, NUM_CLASSES, build_deepclass

__all__ = ["CLASS_NAMES", "NUM_CLASSES", "build_deepclass"]
__version__ = "0.1.0"
