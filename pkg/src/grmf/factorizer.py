"""Alternating-minimization driver for the full factorization.

One outer iteration updates every row of V against the current U (the
n column subproblems of Y), then every row of U against the fresh V
(the d row subproblems).  Subproblems within a half-step are
independent, warm-started at their previous solution, and may run on a
thread pool with results identical to the serial order.
"""

import time
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import truncated_svd
from .core import (
    NGRMF,
    FactorPair,
    HyperParams,
    NumericalError,
    as_matrix,
    global_objective,
    normalize_variant,
)
from .subproblem import dc_solve

__all__ = [
    "FitTrace",
    "init_factors",
    "default_image_hyper",
    "fit",
    "fit_grown",
    "reconstruct",
]


@dataclass
class FitTrace:
    """Per-outer-iteration progress of :func:`fit`.

    ``objective`` is the full factorization objective after the
    iteration; it is non-increasing up to the accumulated subproblem
    slack.  ``u_change``/``v_change`` are squared Frobenius steps.
    """

    objective: list = field(default_factory=list)
    u_change: list = field(default_factory=list)
    v_change: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.objective)


def init_factors(Y, r, strategy="svd", seed=None):
    """Initial factors: scaled truncated SVD (default) or seeded Gaussian.

    ``svd`` splits the rank-r SVD evenly, U = U_r sqrt(S_r) and
    V = V_r sqrt(S_r).  ``random`` draws every entry i.i.d. from
    N(0, mean|Y| / r) using numpy's PCG64 generator (U first, then V),
    so equal seeds give bit-identical factors.
    """
    Y = as_matrix(Y, "Y")
    d, n = Y.shape
    if not 1 <= r <= min(d, n):
        raise ValueError(f"rank must be in [1, {min(d, n)}], got {r}")
    if strategy == "svd":
        res = truncated_svd(Y, r)
        root = np.sqrt(res.singular_values)
        return FactorPair(res.left * root, res.right * root)
    if strategy == "random":
        rng = np.random.default_rng(seed)
        sd = np.sqrt(np.abs(Y).mean() / r)
        u = rng.normal(0.0, sd, size=(d, r))
        v = rng.normal(0.0, sd, size=(n, r))
        return FactorPair(u, v)
    raise ValueError(f"unknown init strategy {strategy!r}")


def default_image_hyper(Y, variant="grmf", **overrides):
    """Hyperparameter recipe for pixel-scale data in [0, 255].

    Thresholds scale with the data: tau1 = tau2 = 0.05 * sqrt(mean|Y|).
    Everything can be overridden by keyword.
    """
    Y = as_matrix(Y, "Y")
    tau = 0.05 * float(np.sqrt(np.abs(Y).mean()))
    tau = max(tau, 1e-8)
    params = dict(
        lam1=1.0,
        lam2=1.0,
        lam3=1e-3,
        tau1=tau,
        tau2=tau,
        variant=normalize_variant(variant),
    )
    params.update(overrides)
    return HyperParams(**params)


def _solve_block(A, B, X0, hyper, workers, label, t):
    """Solve the independent subproblems min_x loss(A x - B[j]) row by row."""

    def solve(j):
        try:
            return dc_solve(A, B[j], X0[j], hyper)[0]
        except NumericalError as err:
            raise NumericalError(
                f"subproblem for {label}={j} failed at outer iteration {t}: {err}"
            ) from err

    out = np.empty_like(X0)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for j, row in enumerate(pool.map(solve, range(B.shape[0]))):
                out[j] = row
    else:
        for j in range(B.shape[0]):
            out[j] = solve(j)
    return out


def fit(Y, r, hyper, init=None, workers=1):
    """Alternating minimization of the full factorization objective.

    Parameters
    ----------
    Y : array, shape (d, n)
    r : int
        Target rank.
    hyper : HyperParams
    init : FactorPair, optional
        Starting factors; defaults to the scaled-SVD initialization.
    workers : int
        Thread count for the independent subproblems of a half-step.

    Returns
    -------
    (FactorPair, FitTrace)

    Stops when both factors move by less than
    ``hyper.outer_rel_tol`` relative squared Frobenius norm, or after
    ``hyper.max_alt`` iterations.
    """
    Y = as_matrix(Y, "Y")
    d, n = Y.shape
    if init is None:
        init = init_factors(Y, r, "svd")
    if init.u.shape != (d, r) or init.v.shape != (n, r):
        raise ValueError(
            f"init factors have shapes {init.u.shape}/{init.v.shape}, "
            f"expected {(d, r)}/{(n, r)}"
        )
    u = init.u.copy()
    v = init.v.copy()
    yt = np.ascontiguousarray(Y.T)
    trace = FitTrace()
    for t in range(1, hyper.max_alt + 1):
        tic = time.perf_counter()
        u_prev_norm = float(np.sum(u * u))
        v_prev_norm = float(np.sum(v * v))
        new_v = _solve_block(u, yt, v, hyper, workers, "column j", t)
        v_change = float(np.sum((new_v - v) ** 2))
        v = new_v
        new_u = _solve_block(v, Y, u, hyper, workers, "row i", t)
        u_change = float(np.sum((new_u - u) ** 2))
        u = new_u
        trace.objective.append(global_objective(Y, u, v, hyper))
        trace.u_change.append(u_change)
        trace.v_change.append(v_change)
        trace.wall_time.append(time.perf_counter() - tic)
        if (
            u_change <= hyper.outer_rel_tol * u_prev_norm
            and v_change <= hyper.outer_rel_tol * v_prev_norm
        ):
            break
    return FactorPair(u, v), trace


def _orient_signs(u, v):
    """Flip factor columns toward the positive orthant (gauge move only).

    (u_k, v_k) -> (-u_k, -v_k) leaves u @ v.T unchanged; flip whenever it
    reduces the squared negative mass of the column pair.
    """
    for k in range(u.shape[1]):
        neg = np.minimum(u[:, k], 0.0) @ np.minimum(u[:, k], 0.0)
        neg += np.minimum(v[:, k], 0.0) @ np.minimum(v[:, k], 0.0)
        pos = np.minimum(-u[:, k], 0.0) @ np.minimum(-u[:, k], 0.0)
        pos += np.minimum(-v[:, k], 0.0) @ np.minimum(-v[:, k], 0.0)
        if pos < neg:
            u[:, k] = -u[:, k]
            v[:, k] = -v[:, k]


def fit_grown(Y, r, hyper, seed=None, workers=1):
    """Rank-continuation fit: rank 1 first, then one extra column at a time.

    Cold high-rank starts on heavily corrupted inputs tend to land in
    poor basins; fitting rank 1 (which is easy to get right robustly)
    and warm-starting each next rank at the previous solution plus one
    small seeded Gaussian column is markedly more reliable.  Between
    stages every column pair is sign-oriented toward the positive
    orthant (a pure gauge move), which keeps the non-negative variant's
    penalty meaningful while leaving the reconstruction untouched.
    Seeds are spawned per stage from ``seed``, so equal seeds reproduce
    the run.

    Returns the final rank-r ``(FactorPair, FitTrace)``.
    """
    Y = as_matrix(Y, "Y")
    d, n = Y.shape
    if not 1 <= r <= min(d, n):
        raise ValueError(f"rank must be in [1, {min(d, n)}], got {r}")
    nonneg = hyper.variant == NGRMF
    stage_seeds = np.random.SeedSequence(seed).spawn(r)
    start = init_factors(Y, 1, "random", seed=stage_seeds[0])
    if nonneg:
        # grow inside the orthant: the scale gauge of the non-negative
        # variant is unstable from sign-misaligned starts
        start = FactorPair(np.abs(start.u), np.abs(start.v))
    factors, trace = fit(Y, 1, hyper, init=start, workers=workers)
    for k in range(2, r + 1):
        rng = np.random.default_rng(stage_seeds[k - 1])
        sd = np.sqrt(np.abs(Y).mean() / (10.0 * k))
        new_u = rng.normal(0.0, sd, size=(d, 1))
        new_v = rng.normal(0.0, sd, size=(n, 1))
        if nonneg:
            new_u = np.abs(new_u)
            new_v = np.abs(new_v)
        u = np.hstack([factors.u, new_u])
        v = np.hstack([factors.v, new_v])
        _orient_signs(u, v)
        factors, trace = fit(Y, k, hyper, init=FactorPair(u, v), workers=workers)
    u = factors.u.copy()
    v = factors.v.copy()
    _orient_signs(u, v)
    return FactorPair(u, v), trace


def reconstruct(factors):
    """Model matrix u @ v.T (no clipping)."""
    return factors.u @ factors.v.T
