"""Robust low-rank matrix factorization with grouping and sparsity penalties.

The estimator minimizes an entrywise L1 reconstruction loss plus
truncated-L1 penalties that pull factor coefficients toward exact zeros
(sparsity) and toward shared values (grouping), solved by alternating
minimization with DC programming and coordinate-wise ADMM.  Variants:
``ngrmf`` (non-negative, ridge replaced by a penalty on negative parts)
and ``gmf-l2`` (squared loss, same penalties).  A truncated-SVD baseline
and a corruption/recovery benchmark harness are included.
"""

from .core import (
    GRMF,
    NGRMF,
    GMF_L2,
    VARIANTS,
    NumericalError,
    normalize_variant,
    as_matrix,
    FactorPair,
    HyperParams,
    ActiveSets,
    SubproblemState,
    soft_threshold,
    penalty_sparsity,
    penalty_grouping,
    penalty_ridge,
    penalty_negridge,
    smooth_abs_loss,
    smooth_loss_grad,
    squared_loss,
    subproblem_objective,
    global_objective,
    active_sets,
)
from .subproblem import (
    DcTrace,
    dc_solve,
    admm_solve,
    majorized_objective,
    update_coordinate,
    update_pair,
    update_duals,
)
from .factorizer import FitTrace, init_factors, default_image_hyper, fit, reconstruct
from .baselines import SvdResult, truncated_svd
from .harness import (
    ParseError,
    load_pgm,
    save_pgm,
    load_csv_matrix,
    save_csv_matrix,
    load_matrix,
    CorruptionSpec,
    corrupt_salt_pepper,
    relative_mae,
    count_groups,
    sparsity_fraction,
    synth_lowrank,
    MetricsRecord,
    SynthSpec,
    SweepConfig,
    run_sweep,
)

__version__ = "0.1.0"
