"""Penalized-regression subproblem solver.

Each factor vector is the solution of

    min_x  loss(A x - b) + lam1 * P1(x) + lam2 * P2(x) + lam3 * P3(x)

with the truncated penalties of :mod:`grmf.core`.  The truncated terms
are non-convex, so the solver runs difference-of-convex (DC) outer
iterations: at each iteration the saturated parts of the penalties are
linearized at the current iterate, which reduces them to plain L1 terms
restricted to the active sets, and the resulting convex subproblem is
solved by coordinate-wise ADMM on the equality-constrained form with
one consensus variable per active pair.
"""

import numpy as np
from dataclasses import dataclass, field

from . import _kernels
from .core import (
    GMF_L2,
    NGRMF,
    NumericalError,
    SubproblemState,
    active_sets,
    as_vector,
    smooth_abs_loss,
    squared_loss,
    subproblem_objective,
    variant_code,
    _check_regression_shapes,
)

__all__ = [
    "DcTrace",
    "consensus_tolerance",
    "majorized_objective",
    "update_coordinate",
    "update_pair",
    "update_duals",
    "admm_solve",
    "dc_solve",
]


@dataclass
class DcTrace:
    """Per-DC-iteration diagnostics of one subproblem solve.

    ``true_objective`` tracks the actual (non-majorized) subproblem
    objective; for the grmf and gmf-l2 variants it is non-increasing up
    to solver slack.  ``max_consensus`` is the largest constraint
    violation |x_l - x_l' - x_ll'| over the active edges at ADMM exit.
    """

    majorized_objective: list = field(default_factory=list)
    true_objective: list = field(default_factory=list)
    admm_iterations: list = field(default_factory=list)
    max_consensus: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.true_objective)


def consensus_tolerance(hyper):
    """Largest consensus residual accepted at ADMM exit."""
    return max(10.0 * hyper.admm_tol, 1e-5)


def majorized_objective(A, b, x, active, hyper):
    """Convex surrogate minimized at one DC iteration (constants omitted).

    The saturated penalty parts linearized away contribute only constant
    offsets, which do not move the argmin and are dropped here.
    """
    A, b, x = _check_regression_shapes(A, b, x)
    if hyper.variant == GMF_L2:
        value = squared_loss(A, b, x)
    else:
        value = smooth_abs_loss(A, b, x, hyper.eps)
    if active.sparsity:
        idx = np.fromiter(active.sparsity, dtype=np.int64)
        value += hyper.lam1 / hyper.tau1 * float(np.abs(x[idx]).sum())
    for l, lp in active.edges:
        value += hyper.lam2 / hyper.tau2 * abs(x[l] - x[lp])
    if hyper.variant == NGRMF:
        if active.negative:
            idx = np.fromiter(active.negative, dtype=np.int64)
            value += hyper.lam3 * float(np.square(x[idx]).sum())
    else:
        value += hyper.lam3 * float(np.square(x).sum())
    return value


def _loss_weights(state, hyper):
    if hyper.variant == GMF_L2:
        return np.full(state.irls_weights.shape[0], 2.0)
    return 1.0 / np.sqrt(state.irls_weights)


def update_coordinate(l, A, b, state, x_ref, hyper):
    """Closed-form update of coordinate l given the rest of the state.

    Returns the new value without mutating ``state``.  The soft-threshold
    branch and (for ngrmf) the ridge indicator are fixed by the active
    sets computed at the DC expansion point ``x_ref``.
    """
    A, b, x = _check_regression_shapes(A, b, state.x)
    r = x.shape[0]
    if not 0 <= l < r:
        raise IndexError(f"coordinate {l} out of range for rank {r}")
    x = x.copy()
    resid = b - A @ x
    w = _loss_weights(state, hyper)
    if hyper.variant == NGRMF:
        quad = 2.0 * hyper.lam3 if l in state.active.negative else 0.0
    else:
        quad = 2.0 * hyper.lam3
    status = _kernels.update_coordinate_inplace(
        l,
        A,
        x,
        resid,
        w,
        state.pairs,
        state.duals,
        state.active.edge_mask(),
        state.nu,
        hyper.lam1 / hyper.tau1,
        quad,
        l in state.active.sparsity,
    )
    if status == _kernels.STATUS_BAD_CURVATURE:
        raise NumericalError(
            f"non-positive curvature for coordinate {l}; "
            "column of A is zero and lam3 contributes nothing"
        )
    if status != _kernels.STATUS_OK:
        raise NumericalError(f"coordinate {l} update produced a non-finite value")
    return float(x[l])


def update_pair(l, lp, state, hyper):
    """Soft-threshold update of the pair variable x_ll' (l < l').

    Pairs outside the active edge set keep their carried value.
    """
    if not l < lp:
        raise ValueError(f"need l < l', got ({l}, {lp})")
    if (l, lp) not in state.active.edges:
        return float(state.pairs[l, lp])
    arg = state.duals[l, lp] + state.nu * (state.x[l] - state.x[lp])
    return float(
        _kernels.soft_threshold_scalar(arg, hyper.lam2 / hyper.tau2) / state.nu
    )


def update_duals(state, hyper):
    """Dual ascent on every active consensus constraint, then grow nu.

    Returns a new state; the input is untouched.
    """
    out = state.copy()
    new_nu, _ = _kernels.update_duals_inplace(
        out.x, out.pairs, out.duals, out.active.edge_mask(), out.nu, hyper.rho
    )
    out.nu = float(new_nu)
    return out


def _run_admm(A, b, x, pairs, duals, active, nu0, hyper):
    """Shared kernel call; mutates x/pairs/duals and returns diagnostics."""
    D = np.empty(A.shape[0])
    iters, consensus, nu, status, fail_l = _kernels.admm_loop(
        A,
        b,
        x,
        pairs,
        duals,
        active.sparsity_mask(),
        active.edge_mask(),
        active.negative_mask(),
        D,
        variant_code(hyper.variant),
        hyper.lam1,
        hyper.lam3,
        hyper.tau1,
        hyper.lam2 / hyper.tau2,
        hyper.eps,
        nu0,
        hyper.rho,
        hyper.admm_tol,
        consensus_tolerance(hyper),
        hyper.max_admm,
    )
    return D, iters, consensus, nu, status, fail_l


def admm_solve(A, b, active, state0, x_ref, hyper):
    """Run the inner ADMM loop to convergence from ``state0``.

    ``active`` must be the active sets computed at the DC expansion
    point ``x_ref``; they fix the soft-threshold branches for the whole
    inner solve.  Returns the converged state (input untouched).
    """
    A, b, _ = _check_regression_shapes(A, b, state0.x)
    as_vector(x_ref, "x_ref")
    state = state0.copy()
    state.validate()
    D, iters, consensus, nu, status, fail_l = _run_admm(
        A, b, state.x, state.pairs, state.duals, active, state0.nu, hyper
    )
    if status != _kernels.STATUS_OK:
        _raise_admm_failure(status, fail_l, iters)
    state.nu = float(nu)
    state.irls_weights = D
    state.active = active
    return state


def _raise_admm_failure(status, fail_l, iters, dc_iteration=None):
    where = f"ADMM iteration {iters}, coordinate {fail_l}"
    if dc_iteration is not None:
        where = f"DC iteration {dc_iteration}, {where}"
    if status == _kernels.STATUS_BAD_CURVATURE:
        raise NumericalError(f"non-positive coordinate curvature at {where}")
    raise NumericalError(f"non-finite iterate at {where}")


def _initial_pairs(x):
    r = x.shape[0]
    pairs = np.zeros((r, r))
    iu, ju = np.triu_indices(r, k=1)
    pairs[iu, ju] = x[iu] - x[ju]
    return pairs


def dc_solve(A, b, x0, hyper):
    """Solve one penalized subproblem by DC outer iterations.

    At iteration m the active sets are recomputed at the current
    iterate, the pair variables on active edges are reset to the actual
    coordinate gaps, the duals restart at zero with penalty weight nu0,
    and the majorized subproblem is handed to the inner ADMM loop.
    Stops once the squared iterate change is within ``hyper.dc_tol`` or
    after ``hyper.max_dc`` iterations.  An inner solve whose exit point
    does not improve the convex surrogate is rejected and terminates the
    loop (safeguarded majorize-minimize step): the geometrically grown
    ADMM penalty can otherwise freeze the iterate marginally above its
    warm start, which would break the descent guarantee.

    Returns ``(x, trace)`` with the final iterate and a :class:`DcTrace`.
    """
    A, b, x0 = _check_regression_shapes(A, b, x0)
    x = x0.copy()
    r = x.shape[0]
    pairs = _initial_pairs(x)
    trace = DcTrace()
    for m in range(hyper.max_dc):
        active = active_sets(x, hyper.tau1, hyper.tau2, hyper.variant)
        edge_mask = active.edge_mask()
        iu, ju = np.nonzero(edge_mask)
        pairs[iu, ju] = x[iu] - x[ju]
        duals = np.zeros((r, r))
        x_prev = x.copy()
        surrogate_start = majorized_objective(A, b, x, active, hyper)
        _, iters, consensus, _, status, fail_l = _run_admm(
            A, b, x, pairs, duals, active, hyper.nu0, hyper
        )
        if status != _kernels.STATUS_OK:
            _raise_admm_failure(status, fail_l, iters, dc_iteration=m + 1)
        surrogate_end = majorized_objective(A, b, x, active, hyper)
        if surrogate_end > surrogate_start:
            x = x_prev
            break
        trace.majorized_objective.append(surrogate_end)
        trace.true_objective.append(subproblem_objective(A, b, x, hyper))
        trace.admm_iterations.append(int(iters))
        trace.max_consensus.append(float(consensus))
        if float(np.sum((x - x_prev) ** 2)) <= hyper.dc_tol:
            break
    return x, trace
