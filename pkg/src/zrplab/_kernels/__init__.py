"""Kernel backend selection.

The compiled Cython extension is preferred; the pure numpy fallback is
picked up automatically when the extension is missing.  Set
ZRPLAB_BACKEND=pure (or =compiled) to force a choice; forcing `compiled`
raises if the extension cannot be imported.

Both backends consume the supplied numpy Generator in the same order, so
sampled integer output is reproducible across backends.
"""

import os

_requested = os.environ.get("ZRPLAB_BACKEND", "").strip().lower()

if _requested not in ("", "pure", "compiled"):
    raise ImportError(f"ZRPLAB_BACKEND must be 'pure' or 'compiled', got {_requested!r}")

if _requested == "pure":
    from . import _pure as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _pure as _impl

BACKEND = _impl.BACKEND
convolve_log = _impl.convolve_log
sample_canonical_batch = _impl.sample_canonical_batch
sample_background_batch = _impl.sample_background_batch
ctmc_simulate = _impl.ctmc_simulate


def using_compiled() -> bool:
    return BACKEND == "compiled"


def get_backend(name: str):
    """Explicit backend module by name, for parity tests and benchmarks."""
    if name == "pure":
        from . import _pure

        return _pure
    if name == "compiled":
        from . import _core  # type: ignore[attr-defined]

        return _core
    raise ValueError(f"unknown backend {name!r}")
