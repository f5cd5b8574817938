"""Backend selection: compiled core when importable, pure Python otherwise.

Set ``SENETA_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("SENETA_PURE_PYTHON", "").strip() not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _fallback

simulate_bh = _impl.simulate_bh
simulate_gw = _impl.simulate_gw
renewal_forward = _impl.renewal_forward
stream_uniforms = _impl.stream_uniforms


def backends() -> dict:
    """Map backend name to module for every backend available here."""
    out = {"python": _fallback}
    try:
        from . import _core

        out["cython"] = _core
    except ImportError:  # pragma: no cover
        pass
    return out
