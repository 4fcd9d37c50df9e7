"""Kernel backend selection.

``_core`` is ordinary Python annotated by ``_core.pxd``.  If the package was
built with Cython the compiled extension shadows the ``.py`` source on
import; otherwise the source itself runs.  ``TWOFLUX_PURE=1`` forces the
interpreted source even when the extension exists.
"""
from __future__ import annotations

import importlib
import importlib.util
import os
from pathlib import Path
from types import ModuleType

_SOURCE = Path(__file__).with_name("_core.py")


def load_pure() -> ModuleType:
    """Load ``_core.py`` as a fresh module, bypassing any compiled build."""
    spec = importlib.util.spec_from_file_location("twoflux._core_pure", _SOURCE)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def load_compiled() -> ModuleType | None:
    """The compiled extension, or None when it was not built."""
    try:
        mod = importlib.import_module("twoflux._core")
    except ImportError:
        return None
    return mod if is_compiled(mod) else None


def is_compiled(mod: ModuleType) -> bool:
    return not str(getattr(mod, "__file__", "")).endswith(".py")


def _select() -> ModuleType:
    if os.environ.get("TWOFLUX_PURE", "") not in ("", "0"):
        return load_pure()
    return load_compiled() or load_pure()


core = _select()
NAME = "compiled" if is_compiled(core) else "python"
