"""Backend selection for the pairwise hot loops.

The compiled extension is used when it was built; set SWITCHFLOCK_PURE=1
(before import) to force the NumPy fallback.  ``use()`` switches at
runtime, which the benchmark uses to time both implementations on the
same inputs.
"""

import os

from . import _pairwise_np as _np_impl

try:
    from . import _pairwise_cy as _cy_impl
except ImportError:  # extension not built; pure fallback
    _cy_impl = None


def _initial():
    forced = os.environ.get("SWITCHFLOCK_PURE", "")
    if _cy_impl is None or forced not in ("", "0"):
        return _np_impl, "pure"
    return _cy_impl, "compiled"


_impl, _backend_name = _initial()


def backend() -> str:
    """Name of the active backend: 'compiled' or 'pure'."""
    return _backend_name


def compiled_available() -> bool:
    return _cy_impl is not None


def use(name: str) -> None:
    """Switch backend at runtime ('compiled' or 'pure')."""
    global _impl, _backend_name
    if name == "pure":
        _impl, _backend_name = _np_impl, "pure"
    elif name == "compiled":
        if _cy_impl is None:
            raise RuntimeError("compiled backend was not built")
        _impl, _backend_name = _cy_impl, "compiled"
    else:
        raise ValueError("backend must be 'compiled' or 'pure'")


def coupling_deriv(x, src, scale, fam, p0, p1):
    return _impl.coupling_deriv(x, src, scale, fam, p0, p1)


def max_pair_distance(x):
    return _impl.max_pair_distance(x)


def diameter_series(snapshots):
    return _impl.diameter_series(snapshots)
