"""Domain types, penalty and loss functions shared by every solver.

The toolkit factorizes a dense d x n matrix Y as U @ V.T (U is d x r,
V is n x r).  Each row of U and V is regularized by three penalties:

* a truncated-L1 sparsity penalty  sum_l min(|x_l| / tau1, 1),
* a truncated-L1 grouping penalty  sum_{l<l'} min(|x_l - x_l'| / tau2, 1)
  over the complete graph on the r coordinates,
* a ridge term sum_l x_l**2 (replaced for the non-negative variant by a
  penalty on negative parts, sum_l min(x_l, 0)**2).

Data matrices are plain 2-D float64 arrays; :func:`as_matrix` validates
them.  All functions here are pure and safe to call concurrently.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "GRMF",
    "NGRMF",
    "GMF_L2",
    "VARIANTS",
    "NumericalError",
    "normalize_variant",
    "variant_code",
    "as_matrix",
    "as_vector",
    "FactorPair",
    "HyperParams",
    "ActiveSets",
    "SubproblemState",
    "soft_threshold",
    "penalty_sparsity",
    "penalty_grouping",
    "penalty_ridge",
    "penalty_negridge",
    "smooth_abs_loss",
    "smooth_loss_grad",
    "squared_loss",
    "subproblem_objective",
    "global_objective",
    "active_sets",
]

# Variant labels (also the CLI spellings).
GRMF = "grmf"
NGRMF = "ngrmf"
GMF_L2 = "gmf-l2"
VARIANTS = (GRMF, NGRMF, GMF_L2)

# Integer codes used by the compiled kernels.
_VARIANT_CODES = {GRMF: 0, NGRMF: 1, GMF_L2: 2}


class NumericalError(ArithmeticError):
    """Raised when a solver produces non-finite values or a degenerate step."""


def normalize_variant(name):
    """Map user spellings like ``GMF_L2`` / ``gmf_l2`` onto the canonical label."""
    canon = str(name).strip().lower().replace("_", "-")
    if canon not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; expected one of {VARIANTS}")
    return canon


def variant_code(variant):
    return _VARIANT_CODES[normalize_variant(variant)]


def as_matrix(values, name="matrix"):
    """Validate and return a dense 2-D float64 array (finite, non-empty)."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(m)


def as_vector(values, name="vector"):
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(v)


@dataclass
class FactorPair:
    """Factor matrices u (d x r) and v (n x r); the model matrix is u @ v.T."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = as_matrix(self.u, "u")
        self.v = as_matrix(self.v, "v")
        if self.u.shape[1] != self.v.shape[1]:
            raise ValueError(
                f"u and v disagree on rank: {self.u.shape[1]} vs {self.v.shape[1]}"
            )
        d, n, r = self.u.shape[0], self.v.shape[0], self.u.shape[1]
        if r > min(d, n):
            raise ValueError(f"rank {r} exceeds min(d, n) = {min(d, n)}")
        if r > min(d, n) / 2:
            warnings.warn(
                f"rank {r} is more than half of min(d, n) = {min(d, n)}; "
                "the factorization is barely low-rank",
                stacklevel=2,
            )

    @property
    def rank(self):
        return self.u.shape[1]

    @property
    def shape(self):
        return (self.u.shape[0], self.v.shape[0])

    def copy(self):
        return FactorPair(self.u.copy(), self.v.copy())


@dataclass(frozen=True)
class HyperParams:
    """Tuning parameters for the factorization solvers.

    Parameters
    ----------
    lam1, lam2, lam3 : float
        Weights of the sparsity, grouping and ridge penalties (>= 0).
    tau1, tau2 : float
        Truncation thresholds of the sparsity and grouping penalties (> 0).
    eps : float
        Smoothing constant of the absolute-value loss, default 1e-6.
    nu0 : float
        Initial ADMM penalty weight, default 1.0.
    rho : float
        Geometric growth factor of the ADMM penalty, must exceed 1.
    outer_rel_tol : float
        Relative squared-Frobenius tolerance of the alternating loop.
    dc_tol, admm_tol : float
        Squared-norm iterate-change tolerances of the DC and ADMM loops.
    max_alt, max_dc, max_admm : int
        Iteration caps of the three nested loops.
    variant : str
        One of ``"grmf"``, ``"ngrmf"``, ``"gmf-l2"``.
    """

    lam1: float = 1.0
    lam2: float = 1.0
    lam3: float = 1e-3
    tau1: float = 0.5
    tau2: float = 0.5
    eps: float = 1e-6
    nu0: float = 1.0
    rho: float = 1.1
    outer_rel_tol: float = 1e-4
    dc_tol: float = 1e-6
    admm_tol: float = 1e-6
    max_alt: int = 50
    max_dc: int = 30
    max_admm: int = 100
    variant: str = GRMF

    def __post_init__(self):
        for name in ("lam1", "lam2", "lam3"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("tau1", "tau2", "eps", "nu0", "outer_rel_tol", "dc_tol", "admm_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.rho > 1:
            raise ValueError(f"rho must be > 1, got {self.rho}")
        for name in ("max_alt", "max_dc", "max_admm"):
            cap = getattr(self, name)
            if not (isinstance(cap, (int, np.integer)) and cap >= 1):
                raise ValueError(f"{name} must be a positive integer, got {cap}")
        object.__setattr__(self, "variant", normalize_variant(self.variant))

    def with_variant(self, variant):
        return replace(self, variant=normalize_variant(variant))


@dataclass(frozen=True)
class ActiveSets:
    """Active penalty sets at a reference iterate (0-based coordinates).

    ``sparsity`` holds coordinates still inside the sparsity threshold,
    ``edges`` holds canonical pairs (l, l') with l < l' still inside the
    grouping threshold, and ``negative`` holds negative coordinates (used
    only by the non-negative variant).  Membership is by strict
    inequality, so a coordinate sitting exactly on the threshold is
    treated as saturated (not active).
    """

    rank: int
    sparsity: frozenset = field(default_factory=frozenset)
    edges: frozenset = field(default_factory=frozenset)
    negative: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        for l in self.sparsity | self.negative:
            if not 0 <= l < self.rank:
                raise ValueError(f"coordinate {l} out of range for rank {self.rank}")
        for pair in self.edges:
            l, lp = pair
            if not (0 <= l < lp < self.rank):
                raise ValueError(f"edge {pair} is not canonical (need 0 <= l < l' < rank)")

    def sparsity_mask(self):
        mask = np.zeros(self.rank, dtype=np.bool_)
        for l in self.sparsity:
            mask[l] = True
        return mask

    def edge_mask(self):
        mask = np.zeros((self.rank, self.rank), dtype=np.bool_)
        for l, lp in self.edges:
            mask[l, lp] = True
        return mask

    def negative_mask(self):
        mask = np.zeros(self.rank, dtype=np.bool_)
        for l in self.negative:
            mask[l] = True
        return mask


@dataclass
class SubproblemState:
    """Mutable state of one penalized-regression solve.

    ``pairs`` and ``duals`` are r x r arrays keyed by canonical index
    pairs (l, l') with l < l'; the lower triangle and diagonal stay zero.
    ``nu`` is the current ADMM penalty weight and ``irls_weights`` holds
    the per-residual weights D_i = (b_i - a_i . x)**2 + eps refreshed at
    the start of each ADMM sweep.
    """

    x: np.ndarray
    pairs: np.ndarray
    duals: np.ndarray
    nu: float
    active: ActiveSets
    irls_weights: np.ndarray

    def validate(self):
        r = self.x.shape[0]
        if self.active.rank != r:
            raise ValueError("active sets and x disagree on rank")
        for name in ("pairs", "duals"):
            arr = getattr(self, name)
            if arr.shape != (r, r):
                raise ValueError(f"{name} must be {r} x {r}")
            if np.any(arr[np.tril_indices(r)] != 0.0):
                raise ValueError(f"{name} must be zero on and below the diagonal")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if np.any(self.irls_weights <= 0):
            raise ValueError("irls_weights must be strictly positive")
        return self

    def copy(self):
        return SubproblemState(
            x=self.x.copy(),
            pairs=self.pairs.copy(),
            duals=self.duals.copy(),
            nu=self.nu,
            active=self.active,
            irls_weights=self.irls_weights.copy(),
        )


def soft_threshold(b, a):
    """Shrink b toward zero by a: sign(b) * max(|b| - a, 0)."""
    if a < 0:
        raise ValueError(f"threshold must be >= 0, got {a}")
    return np.sign(b) * np.maximum(np.abs(b) - a, 0.0)


def penalty_sparsity(x, tau1):
    """Truncated-L1 sparsity penalty sum_l min(|x_l| / tau1, 1)."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.minimum(np.abs(x) / tau1, 1.0).sum())


def penalty_grouping(x, tau2):
    """Truncated-L1 grouping penalty over all coordinate pairs l < l'."""
    x = np.asarray(x, dtype=np.float64)
    r = x.shape[0]
    if r < 2:
        return 0.0
    iu, ju = np.triu_indices(r, k=1)
    gaps = np.abs(x[iu] - x[ju])
    return float(np.minimum(gaps / tau2, 1.0).sum())


def penalty_ridge(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.square(x).sum())


def penalty_negridge(x):
    """Penalty on negative parts only: sum_l min(x_l, 0)**2."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.square(np.minimum(x, 0.0)).sum())


def _check_regression_shapes(A, b, x):
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if A.ndim != 2 or b.ndim != 1 or x.ndim != 1:
        raise ValueError("expected A to be 2-D and b, x to be 1-D")
    if A.shape[0] != b.shape[0] or A.shape[1] != x.shape[0]:
        raise ValueError(
            f"shape mismatch: A is {A.shape}, b has {b.shape[0]} entries, "
            f"x has {x.shape[0]} entries"
        )
    for name, arr in (("A", A), ("b", b), ("x", x)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains non-finite values")
    return A, b, x


def smooth_abs_loss(A, b, x, eps):
    """Smoothed L1 loss sum_i sqrt((b_i - a_i . x)**2 + eps)."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    A, b, x = _check_regression_shapes(A, b, x)
    resid = b - A @ x
    return float(np.sqrt(resid * resid + eps).sum())


def smooth_loss_grad(A, b, x, eps):
    """Gradient of :func:`smooth_abs_loss` with respect to x."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    A, b, x = _check_regression_shapes(A, b, x)
    resid = b - A @ x
    return -(A.T @ (resid / np.sqrt(resid * resid + eps)))


def squared_loss(A, b, x):
    """Plain squared-residual loss sum_i (b_i - a_i . x)**2."""
    A, b, x = _check_regression_shapes(A, b, x)
    resid = b - A @ x
    return float(resid @ resid)


def _penalty_bundle(x, hyper):
    value = hyper.lam1 * penalty_sparsity(x, hyper.tau1)
    value += hyper.lam2 * penalty_grouping(x, hyper.tau2)
    if hyper.variant == NGRMF:
        value += hyper.lam3 * penalty_negridge(x)
    else:
        value += hyper.lam3 * penalty_ridge(x)
    return value


def subproblem_objective(A, b, x, hyper):
    """Loss plus all three penalties for one factor-vector subproblem.

    The loss is the smoothed L1 for grmf/ngrmf and the squared residual
    sum for gmf-l2.
    """
    if hyper.variant == GMF_L2:
        loss = squared_loss(A, b, x)
    else:
        loss = smooth_abs_loss(A, b, x, hyper.eps)
    return loss + _penalty_bundle(x, hyper)


def global_objective(Y, u, v, hyper):
    """Full factorization objective: reconstruction loss plus row penalties.

    The reconstruction loss is the exact (non-smoothed) entrywise L1 norm
    of Y - u @ v.T for grmf/ngrmf and the squared Frobenius norm for
    gmf-l2.  Penalties are summed over the rows of u and the rows of v.
    """
    Y = as_matrix(Y, "Y")
    u = as_matrix(u, "u")
    v = as_matrix(v, "v")
    if Y.shape != (u.shape[0], v.shape[0]) or u.shape[1] != v.shape[1]:
        raise ValueError(
            f"shape mismatch: Y is {Y.shape}, u is {u.shape}, v is {v.shape}"
        )
    resid = Y - u @ v.T
    if hyper.variant == GMF_L2:
        loss = float(np.square(resid).sum())
    else:
        loss = float(np.abs(resid).sum())
    total = loss
    for row in u:
        total += _penalty_bundle(row, hyper)
    for row in v:
        total += _penalty_bundle(row, hyper)
    return total


def active_sets(x_ref, tau1, tau2, variant=GRMF):
    """Active penalty sets at the reference iterate (strict inequalities).

    A coordinate enters the sparsity set while |x_l| < tau1, a pair
    enters the edge set while |x_l - x_l'| < tau2, and (for the
    non-negative variant only) a coordinate enters the negative set
    while x_l < 0.
    """
    if not (tau1 > 0 and tau2 > 0):
        raise ValueError("tau1 and tau2 must be positive")
    variant = normalize_variant(variant)
    x_ref = as_vector(x_ref, "x_ref")
    r = x_ref.shape[0]
    sparsity = frozenset(int(l) for l in np.nonzero(np.abs(x_ref) < tau1)[0])
    edges = []
    for l in range(r - 1):
        for lp in range(l + 1, r):
            if abs(x_ref[l] - x_ref[lp]) < tau2:
                edges.append((l, lp))
    negative = frozenset()
    if variant == NGRMF:
        negative = frozenset(int(l) for l in np.nonzero(x_ref < 0)[0])
    return ActiveSets(rank=r, sparsity=sparsity, edges=frozenset(edges), negative=negative)
