"""
Backend selection for the hot loops.

The compiled module ``_ckernels`` is used when it was built; otherwise the
numpy implementations in ``_pykernels`` serve the same calls.
"""
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active = _BACKENDS.get("cython", _pykernels)


def available_backends():
    return sorted(_BACKENDS)


def backend() -> str:
    """Name of the backend currently serving kernel calls."""
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def use_backend(name: str) -> None:
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}") from None


def conv_volterra(K, gh):
    return _active.conv_volterra(K, gh)


def path_overlaps(trap_ptr, jump_times, start, pos_after, sel, path_times, path_pos, t0, t1):
    return _active.path_overlaps(trap_ptr, jump_times, start, pos_after, sel,
                                 path_times, path_pos, float(t0), float(t1))
