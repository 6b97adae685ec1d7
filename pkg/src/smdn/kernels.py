"""Backend selection for the distance kernel.

The compiled extension is preferred when importable; set SMDN_FORCE_PYTHON=1
to force the NumPy fallback (the benchmark uses this to compare the two).
Both backends share all neighbor-selection logic downstream, so they may
differ only by last-ulp float noise in the distances themselves.
"""

from __future__ import annotations

import os

from . import _lofcore_py

if os.environ.get("SMDN_FORCE_PYTHON"):
    _impl = _lofcore_py
else:
    try:
        from . import _lofcore as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _lofcore_py

pairwise_dists = _impl.pairwise_dists
BACKEND: str = _impl.BACKEND


def available_backends() -> dict[str, object]:
    """Name -> module for every importable kernel backend."""
    backends: dict[str, object] = {_lofcore_py.BACKEND: _lofcore_py}
    try:
        from . import _lofcore

        backends[_lofcore.BACKEND] = _lofcore
    except ImportError:
        pass
    return backends
