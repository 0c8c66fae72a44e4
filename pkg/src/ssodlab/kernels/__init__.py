"""Kernel backend selection.

The package ships two interchangeable implementations of its hot kernels:
a Cython extension (``ssodlab.kernels._core``) and a pure NumPy/Python
fallback (``ssodlab.kernels._fallback``).  The compiled one is preferred
when importable; set ``SSODLAB_KERNELS=python`` or ``=compiled`` to force
a backend explicitly.
"""

from __future__ import annotations

import os

from . import _fallback

try:
    from . import _core
except ImportError:
    _core = None

_choice = os.environ.get("SSODLAB_KERNELS", "auto").strip().lower()
if _choice in ("", "auto"):
    _active = _core if _core is not None else _fallback
elif _choice == "python":
    _active = _fallback
elif _choice == "compiled":
    if _core is None:
        raise ImportError("SSODLAB_KERNELS=compiled but the extension is not built")
    _active = _core
else:
    raise ImportError(f"unknown SSODLAB_KERNELS value: {_choice!r}")

wd_sq_matrix = _active.wd_sq_matrix
rotated_iou_matrix = _active.rotated_iou_matrix
rotated_iou_pair = _active.rotated_iou_pair


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return _active.NAME


def available_backends() -> dict[str, object]:
    """All importable kernel backends keyed by name."""
    out: dict[str, object] = {_fallback.NAME: _fallback}
    if _core is not None:
        out[_core.NAME] = _core
    return out
