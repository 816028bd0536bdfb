"""Kernel backend selection.

The hot inner loops (pairwise-complete Pearson maps, masked rolling
medians, nearest-neighbor-chain linkage) exist twice: a Cython extension
(ckernels) and a numpy fallback (pykernels). The compiled backend is
preferred when importable; LIDD_BACKEND=python|compiled overrides.

Both backends satisfy identical contracts; results agree bitwise for the
median and linkage kernels and to ~1e-15 for Pearson (summation order).
"""

import os

import numpy as np

from lidd.errors import ConfigError, ContractViolation

_requested = os.environ.get("LIDD_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from lidd._core import ckernels as _impl

        BACKEND = "compiled"
    except ImportError:
        from lidd._core import pykernels as _impl

        BACKEND = "python"
elif _requested in ("compiled", "c", "cython"):
    from lidd._core import ckernels as _impl

    BACKEND = "compiled"
elif _requested in ("python", "py", "numpy"):
    from lidd._core import pykernels as _impl

    BACKEND = "python"
else:
    raise ConfigError(
        f"LIDD_BACKEND: unknown value {_requested!r} (use 'auto', 'compiled' or 'python')"
    )

LINKAGE_CODES = {"average": 0, "single": 1, "complete": 2}


def _as_values(values):
    return np.ascontiguousarray(values, dtype=np.float64)


def _as_mask(mask):
    return np.ascontiguousarray(mask, dtype=np.uint8)


def pearson_pairs(values, mask, min_overlap):
    """(corr, count, defined) for all column pairs of a (T, N) frame."""
    v = _as_values(values)
    m = _as_mask(mask)
    if v.shape != m.shape:
        raise ContractViolation(f"values shape {v.shape} != mask shape {m.shape}")
    corr, count, defined = _impl.pearson_pairs(v, m, int(min_overlap))
    return corr, count, np.asarray(defined, dtype=bool)


def rolling_median_masked(values, mask, window):
    """Centered masked rolling median of each column of a (T, N) frame."""
    v = _as_values(values)
    m = _as_mask(mask)
    return _impl.rolling_median_masked(v, m, int(window))


def nn_chain_merges(dist, linkage):
    """Raw (slot_a, slot_b, height) merge rows in NN-chain discovery order."""
    code = LINKAGE_CODES[linkage]
    return _impl.nn_chain(_as_values(dist), code)
