"""Kernel backend selection.

The compiled extension is used when importable; ``EPMATCH_PURE=1`` forces the
pure-Python kernels.
"""

import os

from . import _pykernels

if os.environ.get("EPMATCH_PURE", "") not in ("", "0"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _pykernels
        BACKEND = "python"

# batched evaluation over (N, 10) arrays always goes through numpy
batch_rhs_block = _pykernels.rhs_block
batch_rhs_dense = _pykernels.rhs_dense
