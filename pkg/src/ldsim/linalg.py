"""Matrix-free conjugate gradients.

Dot products use np.sum(a*b) (pairwise, single-threaded) rather than BLAS dot
so results are bit-stable regardless of BLAS threading.
"""
from __future__ import annotations

from typing import Callable

import numpy as np


def cg_solve(
    apply_op: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = 1.0e-10,
    max_iter: int | None = None,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A.

    Stops when ||r|| <= tol * ||b||; raises RuntimeError past max_iter.
    """
    b = np.asarray(b, dtype=float)
    bnorm = float(np.sqrt(np.sum(b * b)))
    if bnorm == 0.0:
        return np.zeros_like(b)
    if max_iter is None:
        max_iter = 10 * b.size
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_op(x) if x0 is not None else b.copy()
    p = r.copy()
    rs = float(np.sum(r * r))
    for _ in range(max_iter):
        if np.sqrt(rs) <= tol * bnorm:
            return x
        ap = apply_op(p)
        alpha = rs / float(np.sum(p * ap))
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(np.sum(r * r))
        p = r + (rs_new / rs) * p
        rs = rs_new
    if np.sqrt(rs) <= tol * bnorm:
        return x
    raise RuntimeError(f"CG did not reach {tol:g} relative residual in {max_iter} iterations")
