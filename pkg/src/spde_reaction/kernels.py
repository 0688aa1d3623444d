"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
implementations in ``_kernels_py`` take over. Setting the environment variable
``SPDE_REACTION_PURE=1`` forces the numpy backend.
"""
import os

from . import _kernels_py

if os.environ.get("SPDE_REACTION_PURE", "") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND

bessel_j0 = _impl.bessel_j0
bessel_j0_array = _impl.bessel_j0_array
bessel_second_difference = _impl.bessel_second_difference
psi_integrand = _impl.psi_integrand
psi_panels = _impl.psi_panels
compensated_time_sums = _impl.compensated_time_sums
triple_increment_sumsq = _impl.triple_increment_sumsq


def available_backends():
    """Names of the kernel modules importable in this environment."""
    names = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        names["cython"] = _kernels
    return names
