"""Backend selection for the hot loops.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy/pure-Python twin in ``_pykernels``.  Set ``PERCOLATE_BACKEND=python`` to
force the fallback, or ``PERCOLATE_BACKEND=compiled`` to fail loudly when the
extension is missing.
"""
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels


def get_backend(name: str = "auto"):
    if name == "auto":
        return BACKENDS.get("compiled", _pykernels)
    try:
        return BACKENDS[name]
    except KeyError:
        raise ImportError(f"kernel backend {name!r} is not available (have: {sorted(BACKENDS)})") from None


_requested = os.environ.get("PERCOLATE_BACKEND", "auto")
_impl = get_backend(_requested)
BACKEND = "compiled" if _impl is _ckernels and _ckernels is not None else "python"
log.debug("percolate kernels: %s backend", BACKEND)

series_accumulate = _impl.series_accumulate
apply_meetings = _impl.apply_meetings
