"""Hot per-node kernels, compiled when available.

The compiled Cython module is preferred. Set ``GREEDYBN_BACKEND=python`` to
force the numpy fallback, or ``GREEDYBN_BACKEND=compiled`` to fail loudly
when the extension was not built.
"""

import os

_requested = os.environ.get("GREEDYBN_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _fallback as _impl
else:
    try:
        from . import _core as _impl
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _fallback as _impl

BACKEND = "python" if _impl.__name__.endswith("_fallback") else "compiled"

config_codes = _impl.config_codes
cpt_counts = _impl.cpt_counts
cpt_logprob_sum = _impl.cpt_logprob_sum
moments_fit = _impl.moments_fit
qr_fit = _impl.qr_fit
resid_ssr = _impl.resid_ssr


def load_backend(name):
    """Return the kernel module for ``name`` ("compiled" or "python")."""
    if name == "python":
        from . import _fallback
        return _fallback
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")


__all__ = [
    "BACKEND",
    "config_codes",
    "cpt_counts",
    "cpt_logprob_sum",
    "load_backend",
    "moments_fit",
    "qr_fit",
    "resid_ssr",
]
