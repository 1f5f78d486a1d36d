"""Hot numeric kernels with selectable backend.

The P1 assembly loop dominates solver runtime. Two implementations are
kept in lockstep: a numba @njit kernel and a vectorized pure-numpy one.
Selection order: the ``MALIN_KERNELS`` environment variable ("numba",
"numpy", or "auto"), falling back to numba when it imports and compiles,
else numpy. ``benchmarks/bench_assembly.py`` compares both.
"""

from __future__ import annotations

import os

from . import assembly_numpy

_BACKEND = None


def _resolve(name):
    if name == "numpy":
        return "numpy"
    if name in ("numba", "auto"):
        try:
            from . import assembly_numba  # noqa: F401
            return "numba"
        except Exception:
            if name == "numba":
                raise RuntimeError("MALIN_KERNELS=numba requested but numba is unavailable")
            return "numpy"
    raise ValueError(f"unknown kernel backend {name!r} (use numba|numpy|auto)")


def backend():
    global _BACKEND
    if _BACKEND is None:
        _BACKEND = _resolve(os.environ.get("MALIN_KERNELS", "auto"))
    return _BACKEND


def set_backend(name):
    """Force a backend (mainly for tests and benchmarks)."""
    global _BACKEND
    _BACKEND = _resolve(name)
    return _BACKEND


def assemble_p1(nodes, simplices, phi_c, b_c, big_b_c, flux_c, f_c, reaction_c):
    """COO triplets and load vector for the P1 weak form, centroid quadrature.

    All coefficient arrays are pre-evaluated at simplex centroids:
    ``phi_c`` (M,d,d), ``b_c``/``big_b_c``/``flux_c`` (M,d), ``f_c``/
    ``reaction_c`` (M,). Returns (rows, cols, vals, load).
    """
    if backend() == "numba":
        from . import assembly_numba
        return assembly_numba.assemble_p1(nodes, simplices, phi_c, b_c, big_b_c,
                                          flux_c, f_c, reaction_c)
    return assembly_numpy.assemble_p1(nodes, simplices, phi_c, b_c, big_b_c,
                                      flux_c, f_c, reaction_c)
