"""Light input coercion shared by the estimator facades and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .hierarchy import Hierarchy, build_bpt
from .raster import Image, LabelMap


def as_image(obj, index: int = 0) -> Image:
    """Accept an :class:`Image` or an (H, W, 3) uint8 array."""
    if isinstance(obj, Image):
        return obj
    arr = np.asarray(obj)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InputError("validation", "as_image",
                         f"image {index}: expected (H, W, 3) pixels, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise InputError("validation", "as_image",
                         f"image {index}: expected uint8 pixels, got {arr.dtype}")
    return Image(arr)


def as_label_map(obj, index: int = 0) -> LabelMap:
    """Accept a :class:`LabelMap` or a 2-d integer array (canonicalized)."""
    if isinstance(obj, LabelMap):
        return obj
    arr = np.asarray(obj)
    if arr.ndim != 2:
        raise InputError("validation", "as_label_map",
                         f"leaves {index}: expected a 2-d label array, got shape {arr.shape}")
    return LabelMap(arr)


def coerce_sequence(X, leaves, hierarchies=None):
    """Normalize estimator inputs to (images, leave partitions, hierarchies).

    ``X`` is a sequence of images, ``leaves`` a matching sequence of leave
    partitions; missing hierarchies are built from the image content.
    """
    images = tuple(as_image(x, i) for i, x in enumerate(X))
    if leaves is None:
        raise InputError("validation", "coerce_sequence",
                         "leave partitions are required (pass leaves=[...])")
    maps = tuple(as_label_map(lv, i) for i, lv in enumerate(leaves))
    if len(images) != len(maps):
        raise InputError("validation", "coerce_sequence",
                         f"{len(images)} images but {len(maps)} leave partitions")
    if hierarchies is None:
        trees = tuple(build_bpt(img, lv) for img, lv in zip(images, maps))
    else:
        trees = tuple(hierarchies)
        if len(trees) != len(images):
            raise InputError("validation", "coerce_sequence",
                             f"{len(images)} images but {len(trees)} hierarchies")
        for i, h in enumerate(trees):
            if not isinstance(h, Hierarchy):
                raise InputError("validation", "coerce_sequence",
                                 f"hierarchy {i}: expected a Hierarchy, got {type(h).__name__}")
    return images, maps, trees
