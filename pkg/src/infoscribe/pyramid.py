"""Bottom-up squeezing: 2x2 block averaging down to a ~100 pixel top."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .raster import Raster

DEFAULT_TOP_MAX_PIXELS = 100


@dataclass(frozen=True)
class Pyramid:
    levels: tuple[Raster, ...]
    top_max_pixels: int = DEFAULT_TOP_MAX_PIXELS

    @property
    def top(self) -> Raster:
        return self.levels[-1]

    def __len__(self):
        return len(self.levels)


def squeeze_once(r: Raster) -> Raster:
    """Halve each dimension (ceil) by averaging 2x2 blocks.

    Each output pixel is ``floor((a + b + c + d + 2) / 4)``. Odd right/bottom
    edges are padded by repeating the last column/row.
    """
    return Raster(kernels.squeeze(np.ascontiguousarray(r.data)))


def level_shapes(width: int, height: int, top_max_pixels: int = DEFAULT_TOP_MAX_PIXELS):
    """Dimensions (width, height) of every pyramid level, bottom first."""
    if top_max_pixels < 1:
        raise ValueError("top_max_pixels must be >= 1")
    shapes = [(width, height)]
    while width * height > top_max_pixels:
        width, height = (width + 1) // 2, (height + 1) // 2
        shapes.append((width, height))
    return shapes


def build_pyramid(r: Raster, top_max_pixels: int = DEFAULT_TOP_MAX_PIXELS) -> Pyramid:
    if top_max_pixels < 1:
        raise ValueError("top_max_pixels must be >= 1")
    levels = [r]
    while levels[-1].width * levels[-1].height > top_max_pixels:
        levels.append(squeeze_once(levels[-1]))
    return Pyramid(tuple(levels), top_max_pixels)
