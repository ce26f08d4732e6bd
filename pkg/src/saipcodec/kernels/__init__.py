"""Kernel backend selection.

Prefers the compiled Cython module when it has been built; falls back to
the NumPy implementation otherwise.  Set SAIP_NO_EXT=1 to force the
fallback (used by the benchmark and the backend parity tests).
"""

import os

from . import _pykernels

if os.environ.get("SAIP_NO_EXT"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND

fetch_block = _impl.fetch_block
interpolate = _impl.interpolate
blend = _impl.blend
ssd = _impl.ssd
satd = _impl.satd
category_map = _impl.category_map
new_contexts = _impl.new_contexts
RangeEncoder = _impl.RangeEncoder
RangeDecoder = _impl.RangeDecoder

python_backend = _pykernels
