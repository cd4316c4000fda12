"""Dense kernels and masked-index machinery used by every other module.

The heavy kernels (matmul, gram, frob_norm, solve_spd) are dispatched to a
backend selected at import time: the compiled extension ``dmcsim._core`` if
it built, otherwise the numpy fallback ``dmcsim._core_py``.  Set
``DMCSIM_KERNELS=c`` or ``DMCSIM_KERNELS=python`` to force one.
"""

import os

import numpy as np

from .errors import ConfigurationError, SingularityError

_forced = os.environ.get("DMCSIM_KERNELS", "auto").lower()
if _forced in ("auto", "", "c"):
    try:
        from . import _core as _backend
    except ImportError:
        if _forced == "c":
            raise
        from . import _core_py as _backend
elif _forced in ("python", "py"):
    from . import _core_py as _backend
else:
    raise ConfigurationError(f"unknown DMCSIM_KERNELS value {_forced!r}")

BACKEND = _backend.name


def as_dense(values, what="matrix"):
    """Coerce to a C-contiguous float64 2-D array, rejecting NaN/Inf."""
    a = np.ascontiguousarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise ConfigurationError(f"{what} must be 2-D, got ndim={a.ndim}")
    if not np.isfinite(a).all():
        raise ConfigurationError(f"{what} contains non-finite entries")
    return a


class MaskedIndexSet:
    """Sorted unique (row, col) index pairs within an m x n grid."""

    def __init__(self, rows, cols, row_idx, col_idx):
        row_idx = np.asarray(row_idx, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        if row_idx.shape != col_idx.shape or row_idx.ndim != 1:
            raise ConfigurationError("mask index arrays must be equal-length 1-D")
        if row_idx.size:
            if row_idx.min() < 0 or row_idx.max() >= rows:
                raise ConfigurationError("mask row index out of bounds")
            if col_idx.min() < 0 or col_idx.max() >= cols:
                raise ConfigurationError("mask col index out of bounds")
        order = np.lexsort((col_idx, row_idx))
        row_idx, col_idx = row_idx[order], col_idx[order]
        flat = row_idx * cols + col_idx
        if np.any(np.diff(flat) == 0):
            raise ConfigurationError("duplicate (row, col) pair in mask")
        self.rows = int(rows)
        self.cols = int(cols)
        self.row_idx = row_idx
        self.col_idx = col_idx

    def __len__(self):
        return self.row_idx.size

    @classmethod
    def from_pairs(cls, rows, cols, pairs):
        pairs = list(pairs)
        return cls(rows, cols,
                   [p[0] for p in pairs], [p[1] for p in pairs])


def matmul(a, b):
    """Matrix product with deterministic accumulation order."""
    a = as_dense(a, "matmul lhs")
    b = as_dense(b, "matmul rhs")
    if a.shape[1] != b.shape[0]:
        raise ConfigurationError(
            f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    return _backend.matmul(a, b)


def gram(a):
    """A^T A; exactly symmetric (each entry pair computed once, mirrored)."""
    return _backend.gram(as_dense(a, "gram input"))


def frob_norm(a):
    """Frobenius norm with deterministic summation order."""
    return _backend.frob_norm(as_dense(a, "frob_norm input"))


def solve_spd(s, b, ridge=0.0, context=""):
    """Solve (S + ridge*I) X = B by Cholesky factorization.

    Raises SingularityError (with *context* in the message) if the matrix
    is not positive definite after the ridge.
    """
    s = as_dense(s, "solve_spd S")
    b = as_dense(b, "solve_spd B")
    if s.shape[0] != s.shape[1]:
        raise ConfigurationError(f"solve_spd S must be square, got {s.shape}")
    if b.shape[0] != s.shape[0]:
        raise ConfigurationError(
            f"solve_spd B rows {b.shape[0]} != S order {s.shape[0]}")
    if ridge < 0:
        raise ConfigurationError("ridge must be >= 0")
    try:
        return _backend.solve_spd(s, b, float(ridge))
    except np.linalg.LinAlgError as exc:
        where = f" ({context})" if context else ""
        raise SingularityError(
            f"SPD solve failed{where}: {exc}") from exc


def masked_assign(m, mask, values):
    """Copy of *m* with values written at the mask positions.

    *values* is aligned with the mask's sorted (row, col) order.  Exact
    value copy, no arithmetic.
    """
    m = as_dense(m, "masked_assign target")
    if (m.shape[0], m.shape[1]) != (mask.rows, mask.cols):
        raise ConfigurationError(
            f"masked_assign shape {m.shape} != mask grid "
            f"({mask.rows}, {mask.cols})")
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(mask),):
        raise ConfigurationError(
            f"masked_assign got {values.shape} values for a "
            f"{len(mask)}-entry mask")
    out = m.copy()
    out[mask.row_idx, mask.col_idx] = values
    return out
