"""Compiled inner loops of the penalized-regression solver.

Everything here operates on plain float64/bool arrays so it can be
jitted; the public wrappers in :mod:`grmf.subproblem` own validation and
the dataclass plumbing.  Status codes returned by the drivers:
0 = ok, 1 = non-finite iterate, 2 = non-positive coordinate curvature.
"""

import numpy as np
from numba import njit

GRMF_CODE = 0
NGRMF_CODE = 1
GMF_L2_CODE = 2

STATUS_OK = 0
STATUS_NOT_FINITE = 1
STATUS_BAD_CURVATURE = 2


@njit(cache=True, nogil=True)
def soft_threshold_scalar(b, a):
    if b > a:
        return b - a
    if b < -a:
        return b + a
    return 0.0


@njit(cache=True, nogil=True)
def refresh_weights(A, b, x, eps, variant, resid, D, w):
    """Residuals, IRLS weights D, and loss weights w at the sweep-start iterate."""
    n, r = A.shape
    for i in range(n):
        s = b[i]
        for q in range(r):
            s -= A[i, q] * x[q]
        resid[i] = s
        D[i] = s * s + eps
        if variant == GMF_L2_CODE:
            w[i] = 2.0
        else:
            w[i] = 1.0 / np.sqrt(D[i])


@njit(cache=True, nogil=True)
def update_coordinate_inplace(
    l, A, x, resid, w, pairs, duals, edge_mask, nu, st_thresh, quad_weight, in_sparsity
):
    """Closed-form coordinate step: writes the minimizer into x[l].

    ``resid`` must equal b - A @ x on entry and is kept consistent.
    Neighbor terms accumulate over both orientations of the canonical
    pairs, with the sign of the dual flipped when l is the second
    element of the pair.
    """
    n = A.shape[0]
    r = x.shape[0]
    alpha = quad_weight
    gamma = 0.0
    for i in range(n):
        ail = A[i, l]
        alpha += w[i] * ail * ail
        gamma += w[i] * ail * (resid[i] + ail * x[l])
    for q in range(r):
        if q == l:
            continue
        if l < q:
            if edge_mask[l, q]:
                alpha += nu
                gamma += -duals[l, q] + nu * (x[q] + pairs[l, q])
        else:
            if edge_mask[q, l]:
                alpha += nu
                gamma += duals[q, l] + nu * (x[q] - pairs[q, l])
    if alpha <= 0.0:
        return STATUS_BAD_CURVATURE
    if in_sparsity:
        gamma = soft_threshold_scalar(gamma, st_thresh)
    new = gamma / alpha
    if not np.isfinite(new):
        return STATUS_NOT_FINITE
    delta = new - x[l]
    if delta != 0.0:
        for i in range(n):
            resid[i] -= A[i, l] * delta
    x[l] = new
    return STATUS_OK


@njit(cache=True, nogil=True)
def update_pairs_inplace(x, pairs, duals, edge_mask, nu, st_thresh):
    """Soft-threshold update of every active pair variable; others carry over."""
    r = x.shape[0]
    for l in range(r - 1):
        for q in range(l + 1, r):
            if edge_mask[l, q]:
                arg = duals[l, q] + nu * (x[l] - x[q])
                pairs[l, q] = soft_threshold_scalar(arg, st_thresh) / nu


@njit(cache=True, nogil=True)
def update_duals_inplace(x, pairs, duals, edge_mask, nu, rho):
    """Dual ascent on the consensus constraints, then grow the penalty.

    Returns (new_nu, worst) where worst is the largest consensus
    residual |x_l - x_l' - pairs[l, l']| over the active edges.
    """
    r = x.shape[0]
    worst = 0.0
    for l in range(r - 1):
        for q in range(l + 1, r):
            if edge_mask[l, q]:
                res = x[l] - x[q] - pairs[l, q]
                duals[l, q] += nu * res
                if abs(res) > worst:
                    worst = abs(res)
    return nu * rho, worst


@njit(cache=True, nogil=True)
def admm_loop(
    A,
    b,
    x,
    pairs,
    duals,
    sparsity_mask,
    edge_mask,
    negative_mask,
    D,
    variant,
    lam1,
    lam3,
    tau1,
    pair_thresh,
    eps,
    nu0,
    rho,
    admm_tol,
    consensus_tol,
    max_admm,
):
    """Inner ADMM loop; mutates x, pairs, duals, D.

    Per iteration: refresh the IRLS weights at the sweep-start iterate,
    sweep the coordinates in cyclic order (Gauss-Seidel), update the
    pair variables, then the duals and the penalty weight.  Stops when
    the squared iterate change is within admm_tol and every active
    consensus residual is within consensus_tol, or at max_admm.

    Returns (iterations, worst_consensus, nu, status, failed_coordinate).
    """
    n, r = A.shape
    resid = np.empty(n)
    w = np.empty(n)
    nu = nu0
    st1 = lam1 / tau1
    two_lam3 = 2.0 * lam3
    worst = 0.0
    it = 0
    for k in range(max_admm):
        it = k + 1
        refresh_weights(A, b, x, eps, variant, resid, D, w)
        change = 0.0
        for l in range(r):
            if variant == NGRMF_CODE:
                quad = two_lam3 if negative_mask[l] else 0.0
            else:
                quad = two_lam3
            old = x[l]
            status = update_coordinate_inplace(
                l, A, x, resid, w, pairs, duals, edge_mask, nu, st1, quad,
                sparsity_mask[l],
            )
            if status != STATUS_OK:
                return it, worst, nu, status, l
            d = x[l] - old
            change += d * d
        update_pairs_inplace(x, pairs, duals, edge_mask, nu, pair_thresh)
        nu, worst = update_duals_inplace(x, pairs, duals, edge_mask, nu, rho)
        if change <= admm_tol and worst <= consensus_tol:
            break
    return it, worst, nu, STATUS_OK, -1
