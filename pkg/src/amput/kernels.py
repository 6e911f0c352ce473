"""Backend selection for the numerical hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback.  ``AMPUT_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("AMPUT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels

rollback = _impl.rollback
stopping_forward = _impl.stopping_forward
lcp_brennan_schwartz = _impl.lcp_brennan_schwartz
lcp_psor = _impl.lcp_psor


def backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
