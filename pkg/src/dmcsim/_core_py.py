"""Pure-Python (numpy/scipy) dense kernels.

Fallback backend used when the compiled extension is unavailable or when
DMCSIM_KERNELS=python is set.  Products go through ``np.einsum`` without
path optimization so the accumulation order is fixed and independent of
BLAS threading.
"""

import math

import numpy as np
import scipy.linalg


name = "python"


def matmul(a, b):
    """Matrix product A @ B."""
    return np.einsum("ik,kj->ij", a, b)


def gram(a):
    """A^T A, exactly symmetric (upper triangle computed, then mirrored)."""
    g = np.einsum("ki,kj->ij", a, a)
    upper = np.triu(g)
    return upper + np.triu(g, 1).T


def frob_norm(a):
    """Frobenius norm."""
    return math.sqrt(float(np.einsum("ij,ij->", a, a)))


def solve_spd(s, b, ridge):
    """Solve (S + ridge*I) X = B via Cholesky.

    Raises np.linalg.LinAlgError if the matrix is not positive definite.
    """
    m = s if ridge == 0.0 else s + ridge * np.eye(s.shape[0])
    c, low = scipy.linalg.cho_factor(m, lower=True, check_finite=False)
    return scipy.linalg.cho_solve((c, low), b, check_finite=False)
