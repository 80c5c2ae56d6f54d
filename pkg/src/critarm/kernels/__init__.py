"""Backend selector for the hot kernels.

Imports the compiled extension when available and falls back to the
numpy/scipy implementation otherwise.  Set the environment variable
``CRITARM_FORCE_FALLBACK=1`` to force the pure-Python backend.
"""

import os

if os.environ.get("CRITARM_FORCE_FALLBACK", "") == "1":
    from . import _fallback as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl

BACKEND = _impl.BACKEND
label_clusters = _impl.label_clusters
worm_run = _impl.worm_run


def get_backend(name=None):
    """Return the kernel module for ``name`` in {"compiled", "fallback", None}.

    ``None`` returns the active (auto-selected) backend.
    """
    if name is None:
        return _impl
    if name == "fallback":
        from . import _fallback
        return _fallback
    if name == "compiled":
        from . import _core  # raises ImportError when unavailable
        return _core
    raise ValueError(f"unknown backend {name!r}")
