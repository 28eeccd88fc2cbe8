"""Top-down multiscale extraction of reconstructible image descriptions.

Typical use::

    from infoscribe import read_image, describe, serialize, reconstruct

    d = describe(read_image("scene.pgm"))
    text = serialize(d)
    assert reconstruct(d, level=0).width == d.width
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .description import (
    ImageDescription,
    density_profile,
    describe,
    deserialize,
    reconstruct,
    serialize,
)
from .pyramid import build_pyramid, squeeze_once
from .raster import Raster, load_image, read_image, save_image, write_image
from .segmenter import SegParams, expand_level, extract_segments, segment_top
from .semantics import Lexicon, affirm_context, annotate, compose_narrative, fire_labels, load_lexicon

__all__ = [
    "BACKEND",
    "ImageDescription",
    "Lexicon",
    "Raster",
    "SegParams",
    "affirm_context",
    "annotate",
    "build_pyramid",
    "compose_narrative",
    "density_profile",
    "describe",
    "deserialize",
    "expand_level",
    "extract_segments",
    "fire_labels",
    "load_image",
    "load_lexicon",
    "read_image",
    "reconstruct",
    "save_image",
    "segment_top",
    "serialize",
    "squeeze_once",
    "write_image",
]
