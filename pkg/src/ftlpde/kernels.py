"""Backend selection for the hot kernels.

The compiled extension is used when it imports; ``FTLPDE_BACKEND=python``
forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py as python_kernels

try:
    if os.environ.get("FTLPDE_BACKEND", "").strip().lower() == "python":
        raise ImportError("python backend forced")
    from . import _kernels as compiled_kernels
except ImportError:
    compiled_kernels = None

BACKEND = "cython" if compiled_kernels is not None else "python"


def available_backends() -> list[str]:
    return ["cython", "python"] if compiled_kernels is not None else ["python"]


def get_kernels(backend: str | None = None):
    backend = backend or BACKEND
    if backend == "cython":
        if compiled_kernels is None:
            raise RuntimeError("compiled kernels are not built; reinstall with Cython available")
        return compiled_kernels
    if backend == "python":
        return python_kernels
    raise ValueError(f"unknown backend {backend!r}")
