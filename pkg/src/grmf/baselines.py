"""Rank-r truncated SVD, used for initialization and as a benchmark.

The decomposition is computed in-repo by one-sided Jacobi rotations
(Hestenes): the columns of the data matrix are rotated until mutually
orthogonal, which yields the singular values as column norms and both
singular bases without forming the Gram matrix.  At the image scales
this toolkit targets (<= a few hundred rows/columns) the O(min(d,n)^2 d)
sweeps are cheap and the result matches LAPACK to near machine
precision.
"""

import numpy as np
from dataclasses import dataclass
from numba import njit

from .core import NumericalError, as_matrix

__all__ = ["SvdResult", "truncated_svd"]


@dataclass
class SvdResult:
    """Top singular triplets: values sorted descending, orthonormal bases."""

    singular_values: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def reconstruct(self):
        return (self.left * self.singular_values) @ self.right.T


@njit(cache=True, nogil=True)
def _jacobi_sweeps(cols, rot, max_sweeps, tol):
    """Rotate the rows of ``cols`` (matrix columns stored row-wise) until
    pairwise orthogonal; accumulates the same rotations in ``rot``.

    Returns the number of sweeps used, or -1 if the cap was hit.
    Numerically-zero columns (relative to the largest initial column)
    are left alone: rotating rounding noise never converges under a
    relative criterion.
    """
    n, d = cols.shape
    m = rot.shape[1]
    dead = 0.0
    for p in range(n):
        s = 0.0
        for i in range(d):
            s += cols[p, i] * cols[p, i]
        if s > dead:
            dead = s
    dead *= 1e-30
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = 0.0
                aqq = 0.0
                apq = 0.0
                for i in range(d):
                    app += cols[p, i] * cols[p, i]
                    aqq += cols[q, i] * cols[q, i]
                    apq += cols[p, i] * cols[q, i]
                if app <= dead or aqq <= dead:
                    continue
                denom = np.sqrt(app) * np.sqrt(aqq)
                if abs(apq) <= tol * denom:
                    continue
                zeta = (aqq - app) / (2.0 * apq)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for i in range(d):
                    bp = cols[p, i]
                    bq = cols[q, i]
                    cols[p, i] = c * bp - s * bq
                    cols[q, i] = s * bp + c * bq
                for i in range(m):
                    rp = rot[p, i]
                    rq = rot[q, i]
                    rot[p, i] = c * rp - s * rq
                    rot[q, i] = s * rp + c * rq
                rotated = True
        if not rotated:
            return sweep
    return -1


def _orthonormal_completion(basis, k):
    """Replace column k of ``basis`` with a unit vector orthogonal to the rest."""
    d = basis.shape[0]
    others = [j for j in range(basis.shape[1]) if j != k]
    for cand in range(d):
        vec = np.zeros(d)
        vec[cand] = 1.0
        for j in others:
            vec -= (basis[:, j] @ vec) * basis[:, j]
        norm = np.linalg.norm(vec)
        if norm > 0.5:
            basis[:, k] = vec / norm
            return
    raise NumericalError("could not complete an orthonormal basis")


def truncated_svd(Y, r, max_sweeps=100, tol=1e-12):
    """Top-r singular triplets of Y by one-sided Jacobi.

    Parameters
    ----------
    Y : array, shape (d, n)
    r : int
        Number of triplets, 1 <= r <= min(d, n).
    max_sweeps : int
        Cap on Jacobi sweeps; exceeding it raises :class:`NumericalError`.
    tol : float
        Relative orthogonality threshold for column pairs.

    Returns
    -------
    SvdResult
        ``reconstruct()`` is the best rank-r Frobenius approximation.
    """
    Y = as_matrix(Y, "Y")
    d, n = Y.shape
    if not 1 <= r <= min(d, n):
        raise ValueError(f"rank must be in [1, {min(d, n)}], got {r}")
    transposed = d < n
    work = Y.copy() if not transposed else np.ascontiguousarray(Y.T)
    # columns stored as contiguous rows for the sweep kernel
    cols = np.ascontiguousarray(work.T)
    rot = np.eye(cols.shape[0])
    sweeps = _jacobi_sweeps(cols, rot, max_sweeps, tol)
    if sweeps < 0:
        raise NumericalError(f"Jacobi SVD did not converge within {max_sweeps} sweeps")
    sigma = np.sqrt(np.sum(cols * cols, axis=1))
    order = np.argsort(-sigma, kind="stable")[:r]
    sigma = sigma[order]
    span = cols[order].T             # d_tall x r, columns scaled by sigma
    rotated = rot[order].T           # n_short x r, orthonormal
    scale = sigma[0] if sigma.size and sigma[0] > 0 else 0.0
    span_unit = np.zeros_like(span)
    for k in range(r):
        if scale > 0 and sigma[k] > 1e-13 * scale:
            span_unit[:, k] = span[:, k] / sigma[k]
        else:
            sigma[k] = 0.0
    for k in range(r):
        if sigma[k] == 0.0:
            _orthonormal_completion(span_unit, k)
    left, right = (rotated, span_unit) if transposed else (span_unit, rotated)
    # fix signs for determinism: dominant entry of each left vector positive
    for k in range(r):
        pivot = np.argmax(np.abs(left[:, k]))
        if left[pivot, k] < 0:
            left[:, k] = -left[:, k]
            right[:, k] = -right[:, k]
    return SvdResult(
        singular_values=np.ascontiguousarray(sigma),
        left=np.ascontiguousarray(left),
        right=np.ascontiguousarray(right),
    )
