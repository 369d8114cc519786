"""Kernel backend selection.

Two interchangeable backends implement the scoring and gradient kernels: a
compiled Cython extension and a pure-numpy fallback. Import prefers the
compiled one when present. KGEAUDIT_BACKEND=py or =c forces a choice; forcing
"c" without the built extension is an error rather than a silent fallback.

Each backend is bit-for-bit deterministic against itself. Across backends,
scores agree to float tolerance, not bitwise: summation order differs.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from ..errors import ConfigError
from . import py_backend

_BACKENDS = {"py": py_backend}

try:
    from . import _ckernels

    _BACKENDS["c"] = _ckernels
except ImportError:
    _ckernels = None

_env = os.environ.get("KGEAUDIT_BACKEND", "").strip().lower()
if _env == "":
    _active = _BACKENDS.get("c", py_backend)
elif _env in _BACKENDS:
    _active = _BACKENDS[_env]
else:
    raise ConfigError(
        f"KGEAUDIT_BACKEND={_env!r} not available; have {sorted(_BACKENDS)}"
    )


def active():
    """The backend module currently in use."""
    return _active


def active_name() -> str:
    return _active.NAME


def available() -> list[str]:
    return sorted(_BACKENDS)


def get(name: str):
    if name not in _BACKENDS:
        raise ConfigError(f"backend {name!r} not available; have {sorted(_BACKENDS)}")
    return _BACKENDS[name]


@contextmanager
def forced(name: str):
    """Temporarily swaps the active backend. Not thread-safe."""
    global _active
    previous = _active
    _active = get(name)
    try:
        yield _active
    finally:
        _active = previous
