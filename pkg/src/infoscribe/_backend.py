"""Kernel backend selection.

The compiled extension is preferred. Set ``INFOSCRIBE_PURE=1`` to force the
pure-Python kernels (useful for debugging and for equivalence tests).
"""

import os

from . import _pykernels

kernels = _pykernels

if os.environ.get("INFOSCRIBE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # noqa: F811
    except ImportError:
        kernels = _pykernels

BACKEND = kernels.NAME
