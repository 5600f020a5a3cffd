"""Backend selection for the hot path kernels.

The compiled extension is used when it was built; otherwise the numpy
reference implementation is loaded.  Set ``DAVISLAB_KERNELS=python`` to force the
fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("DAVISLAB_KERNELS", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
ds_advance = _impl.ds_advance


def get_backend(name: str | None = None):
    """Kernel module by name (``"cython"`` or ``"python"``); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels  # type: ignore[attr-defined]

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
