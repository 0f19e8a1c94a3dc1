"""Backend selection: compiled ``_core`` when importable, numpy otherwise.

Set ``KTHIN_BACKEND=python`` to force the numpy fallback.
"""
import os

from . import _fallback

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = {"python": _fallback}
if _core is not None:
    BACKENDS["compiled"] = _core

_active = _core if (_core is not None and os.environ.get("KTHIN_BACKEND", "") != "python") else _fallback


def get(name=None):
    """Return the active backend module, or a named one."""
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def use(name):
    """Switch the active backend for the rest of the process."""
    global _active
    _active = get(name)
    return _active


def name():
    return _active.NAME
