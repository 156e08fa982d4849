"""Tiny synthetic datasets for smoke tests and demos."""

import numpy as np

from .network import NUM_CLASSES

# one distinct RGB corner per class (indices 1..7 of the unit cube)
_CLASS_COLORS = [((k >> 2) & 1, (k >> 1) & 1, k & 1) for k in range(1, NUM_CLASSES + 1)]


def color_separable_set(copies_per_class: int = 2, size: int = 128):
    """Constant-color images, one color per class, shade varying per copy.

    Linearly separable by channel means, so any functioning classifier
    must reach full training accuracy quickly.
    """
    images = []
    labels = []
    for cls, color in enumerate(_CLASS_COLORS):
        for copy in range(copies_per_class):
            shade = 0.6 + 0.3 * copy / max(copies_per_class - 1, 1)
            img = np.empty((3, size, size), dtype=np.float32)
            for ch in range(3):
                img[ch] = color[ch] * shade
            images.append(img)
            labels.append(cls)
    return np.stack(images), np.array(labels, dtype=np.int64)
