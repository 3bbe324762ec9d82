"""Backend selection for the neighbourhood-scanning core.

The compiled extension is used when it is importable; setting
``RHVRP_PURE_PYTHON=1`` forces the interpreted twin.  ``load_backend`` gives
explicit access to either one, which the tests and the benchmark use to run
both side by side.
"""
from __future__ import annotations

import importlib.machinery
import importlib.util
import os
import sys
from pathlib import Path

_SOURCE = Path(__file__).with_name("_kernels.py")
_cache: dict[str, object] = {}


def _load_pure():
    if "python" not in _cache:
        name = "rhvrp._kernels_pure"
        loader = importlib.machinery.SourceFileLoader(name, str(_SOURCE))
        spec = importlib.util.spec_from_loader(name, loader)
        mod = importlib.util.module_from_spec(spec)
        sys.modules[name] = mod
        loader.exec_module(mod)
        _cache["python"] = mod
    return _cache["python"]


def _load_compiled():
    if "cython" not in _cache:
        from . import _kernels as mod

        if not getattr(mod, "COMPILED", False):
            raise ImportError("compiled kernels are not built")
        _cache["cython"] = mod
    return _cache["cython"]


def load_backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _load_pure()
    if name == "cython":
        return _load_compiled()
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        _load_compiled()
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def _select():
    if os.environ.get("RHVRP_PURE_PYTHON") == "1":
        return "python", _load_pure()
    try:
        return "cython", _load_compiled()
    except ImportError:
        return "python", _load_pure()


BACKEND, _mod = _select()
Core = _mod.Core
# move kinds understood by Core.scan and Core.eval_move
RELOCATE, EXCHANGE, TWO_OPT = 0, 1, 2
