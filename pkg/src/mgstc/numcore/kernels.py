"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise, or when
``MGSTC_KERNELS=python`` is set, the numpy fallback is used. Both expose the
same functions, so callers only ever import from here.
"""
import os

from . import _pykernels

python_kernels = _pykernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("MGSTC_KERNELS", "").lower() != "python":
    _active = compiled_kernels
    BACKEND = "cython"
else:
    _active = _pykernels
    BACKEND = "python"

softmax_forward = _active.softmax_forward
softmax_backward = _active.softmax_backward
layernorm_forward = _active.layernorm_forward
layernorm_backward = _active.layernorm_backward
gelu_forward = _active.gelu_forward
gelu_backward = _active.gelu_backward
cumulative_mean = _active.cumulative_mean
