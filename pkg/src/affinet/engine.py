"""Backend selection for the batch event loop.

The compiled core (``affinet._core``, Cython) is preferred; the pure-Python
fallback is picked when the extension is missing or when the environment
variable ``AFFINET_PURE_PYTHON`` is set to a non-empty value.  Both produce
bit-identical event streams for the same seed, so the choice only affects
speed (see ``benchmarks/engine_bench.py``).
"""

from __future__ import annotations

import os

from . import _engine_py

if os.environ.get("AFFINET_PURE_PYTHON"):
    _impl = _engine_py
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - exercised via AFFINET_PURE_PYTHON
        _impl = _engine_py

simulate = _impl.simulate
BACKEND = _impl.BACKEND


def backends() -> dict:
    """All importable backends keyed by name (used by parity tests/benchmarks)."""
    found = {"python": _engine_py}
    try:
        from . import _core

        found["cython"] = _core
    except ImportError:  # pragma: no cover
        pass
    return found
