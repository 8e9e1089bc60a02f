"""Kernel selection: the compiled extension when available, the vectorized
numpy twin otherwise.

Set ``QGEN_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` names the
implementation chosen at import time; ``get_backend(name)`` fetches a
specific one (used by the benchmark and the agreement tests).
"""

from __future__ import annotations

import os

import numpy as np

from ._compile import CompiledProgram

if os.environ.get("QGEN_PURE_PYTHON") == "1":
    from . import _vm_py as _impl
else:
    try:
        from . import _vm_c as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _vm_py as _impl

BACKEND: str = _impl.BACKEND_NAME


def get_backend(name: str):
    if name == "python":
        from . import _vm_py

        return _vm_py
    if name == "cython":
        from . import _vm_c

        return _vm_c
    raise ValueError(f"unknown backend {name!r}")


def enumerate_triples(masks: np.ndarray) -> np.ndarray:
    return _impl.enumerate_triples(np.ascontiguousarray(masks, dtype=np.uint64))


def eval_batch(compiled: CompiledProgram, arrays, impl=None) -> np.ndarray:
    """Answer codes of one compiled program over packed board arrays."""
    impl = impl or _impl
    out = np.empty(arrays.tiles.shape[0], dtype=np.int64)
    impl.eval_batch(
        compiled.code, arrays.tiles, arrays.sizes, arrays.orients, arrays.touches, out
    )
    return out
