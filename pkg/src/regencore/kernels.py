"""Backend selection for the GF(2^8) hot kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
is used. Setting ``REGENCORE_PURE_PYTHON=1`` forces the fallback.
"""

import os
from types import ModuleType

from regencore import _kernels_py

_compiled: ModuleType | None
try:
    from regencore import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None


def available_backends() -> list[str]:
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "cython")
    return names


def get_backend(name: str) -> ModuleType:
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


if _compiled is not None and os.environ.get("REGENCORE_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "cython"
else:
    BACKEND = "python"

impl = get_backend(BACKEND)
