"""Backend dispatch for the row kernels.

The compiled extension is used when present; the numpy implementation is a
drop-in replacement (always available, also the reference in tests). The
active backend can be forced, mostly for benchmarks and parity tests.
"""

from . import _kernels_py

try:
    from . import _kernels_cy

    _DEFAULT = "cython"
except ImportError:  # extension not built on this install
    _kernels_cy = None
    _DEFAULT = "python"

_BACKENDS = {"python": _kernels_py}
if _kernels_cy is not None:
    _BACKENDS["cython"] = _kernels_cy

_active = _BACKENDS[_DEFAULT]
_active_name = _DEFAULT


def available_backends():
    return sorted(_BACKENDS)


def get_backend():
    return _active_name


def use_backend(name):
    """Force a kernel backend ('python' or 'cython'). Returns the previous
    backend name so callers can restore it."""
    global _active, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    prev = _active_name
    _active = _BACKENDS[name]
    _active_name = name
    return prev


def soft_denoise_rows(pseudo, theta):
    return _active.soft_denoise_rows(pseudo, theta)


def mmse_denoise_rows(pseudo, gamma, tau_sq, lam, log_si_ratio):
    return _active.mmse_denoise_rows(pseudo, gamma, tau_sq, lam, log_si_ratio)
