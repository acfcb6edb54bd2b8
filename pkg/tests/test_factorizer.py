import numpy as np
import pytest

import grmf.factorizer
from grmf import (
    FactorPair,
    HyperParams,
    NumericalError,
    dc_solve,
    default_image_hyper,
    fit,
    global_objective,
    init_factors,
    reconstruct,
    synth_lowrank,
    truncated_svd,
    count_groups,
)
from grmf.factorizer import fit_grown


def small_hyper(**kw):
    base = dict(lam1=0.3, lam2=0.3, lam3=1e-3, tau1=0.5, tau2=0.5)
    base.update(kw)
    return HyperParams(**base)


# ---------------------------------------------------------------- init_factors

def test_svd_init_recovers_exact_rank():
    rng = np.random.default_rng(0)
    u = rng.normal(size=(12, 3))
    v = rng.normal(size=(10, 3))
    Y = u @ v.T
    f = init_factors(Y, 3)
    err = np.linalg.norm(Y - f.u @ f.v.T)
    assert err <= 1e-8 * np.linalg.norm(Y)


def test_random_init_is_seed_deterministic():
    rng = np.random.default_rng(1)
    Y = rng.normal(size=(8, 6)) * 50
    a = init_factors(Y, 2, "random", seed=123)
    b = init_factors(Y, 2, "random", seed=123)
    c = init_factors(Y, 2, "random", seed=124)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    assert not np.array_equal(a.u, c.u)


def test_svd_init_matches_truncated_svd_reconstruction():
    rng = np.random.default_rng(2)
    Y = rng.normal(size=(9, 7)) * 10
    f = init_factors(Y, 3)
    res = truncated_svd(Y, 3)
    assert np.abs(f.u @ f.v.T - res.reconstruct()).max() <= 1e-10


def test_init_factors_rejects_bad_rank():
    Y = np.ones((4, 5))
    with pytest.raises(ValueError):
        init_factors(Y, 0)
    with pytest.raises(ValueError):
        init_factors(Y, 5)
    with pytest.raises(ValueError):
        init_factors(Y, 2, "fancy")


# ---------------------------------------------------------------- fit

def test_fit_rank_one_outer_product():
    rng = np.random.default_rng(3)
    u = np.abs(rng.normal(size=(10, 1))) + 1
    v = np.abs(rng.normal(size=(8, 1))) + 1
    Y = u @ v.T
    h = small_hyper(lam1=1e-6, lam2=1e-6, lam3=1e-6)
    factors, _ = fit(Y, 1, h)
    rel = np.abs(Y - reconstruct(factors)).sum() / np.abs(Y).sum()
    assert rel <= 1e-3


def test_fit_half_step_order_matches_manual_run():
    # with max_alt = 1: the V step uses the initial U, the U step the fresh V
    rng = np.random.default_rng(4)
    Y = rng.normal(size=(7, 6)) * 5
    h = small_hyper(max_alt=1)
    init = init_factors(Y, 2, "random", seed=9)
    got, _ = fit(Y, 2, h, init=init)

    v_manual = np.vstack([dc_solve(init.u, Y[:, j], init.v[j], h)[0] for j in range(6)])
    u_manual = np.vstack([dc_solve(v_manual, Y[i, :], init.u[i], h)[0] for i in range(7)])
    assert np.array_equal(got.v, v_manual)
    assert np.array_equal(got.u, u_manual)


def test_fit_half_steps_do_not_increase_conditional_objective():
    rng = np.random.default_rng(5)
    Y = rng.normal(size=(8, 7)) * 5
    h = small_hyper()
    init = init_factors(Y, 2, "random", seed=11)
    slack = 1e-6
    v1 = np.vstack([dc_solve(init.u, Y[:, j], init.v[j], h)[0] for j in range(7)])
    assert global_objective(Y, init.u, v1, h) <= global_objective(Y, init.u, init.v, h) + slack
    u1 = np.vstack([dc_solve(v1, Y[i, :], init.u[i], h)[0] for i in range(8)])
    assert global_objective(Y, u1, v1, h) <= global_objective(Y, init.u, v1, h) + slack


def test_fit_objective_trace_is_monotone():
    rng = np.random.default_rng(6)
    for variant in ("grmf", "gmf-l2"):
        Y = np.abs(rng.normal(size=(10, 9))) * 40
        h = small_hyper(variant=variant, tau1=1.0, tau2=1.0)
        _, trace = fit(Y, 2, h)
        slack = 10 * h.dc_tol * (10 + 9)
        for prev, cur in zip(trace.objective, trace.objective[1:]):
            assert cur <= prev + slack
        assert trace.iterations == len(trace.u_change) == len(trace.wall_time)


def test_fit_permutation_equivariance():
    rng = np.random.default_rng(7)
    Y = rng.normal(size=(8, 6)) * 10
    perm = rng.permutation(8)
    h = small_hyper(max_alt=3)
    init = init_factors(Y, 2, "random", seed=5)
    f1, _ = fit(Y, 2, h, init=init)
    init_p = FactorPair(init.u[perm], init.v.copy())
    f2, _ = fit(Y[perm], 2, h, init=init_p)
    scale = np.abs(f1.u).max()
    assert np.abs(f2.u - f1.u[perm]).max() <= 1e-8 * max(scale, 1.0)
    assert np.abs(f2.v - f1.v).max() <= 1e-8 * max(scale, 1.0)


def test_fit_parallel_matches_serial_bitwise():
    rng = np.random.default_rng(8)
    Y = rng.normal(size=(10, 8)) * 20
    h = small_hyper(max_alt=4)
    init = init_factors(Y, 2, "random", seed=3)
    serial, _ = fit(Y, 2, h, init=init, workers=1)
    threaded, _ = fit(Y, 2, h, init=init, workers=4)
    assert np.array_equal(serial.u, threaded.u)
    assert np.array_equal(serial.v, threaded.v)


def test_fit_reports_failing_subproblem_context(monkeypatch):
    def boom(A, b, x0, hyper):
        raise NumericalError("synthetic failure")

    monkeypatch.setattr(grmf.factorizer, "dc_solve", boom)
    Y = np.abs(np.random.default_rng(9).normal(size=(6, 5))) * 10
    with pytest.raises(NumericalError, match=r"column j=0 .* iteration 1"):
        fit(Y, 2, small_hyper())


def test_fit_validates_init_shapes():
    Y = np.ones((6, 5))
    bad = FactorPair(np.zeros((6, 1)), np.zeros((4, 1)))
    with pytest.raises(ValueError):
        fit(Y, 1, small_hyper(), init=bad)


def test_grouping_effect_at_scale():
    # ground truth rows carry two well-separated levels; fitting corrupted
    # data from a jittered start must pull rows back to few clusters
    from grmf.harness import _component_count
    from grmf import CorruptionSpec, corrupt_salt_pepper

    y, truth = synth_lowrank(40, 36, 6, 2, zero_frac=0.0, seed=21)
    yc = corrupt_salt_pepper(y, CorruptionSpec(ratio=0.2, seed=1))
    h = default_image_hyper(yc, lam1=2.0, lam2=1.0, tau1=2 * default_image_hyper(yc).tau1, eps=1e-4)
    # the instance satisfies the separation precondition for grouping
    levels = np.unique(np.round(truth.u, 9))
    gaps = np.diff(levels)
    assert (gaps[gaps > 1e-9] >= 4 * h.tau2).all()
    rng = np.random.default_rng(2)
    init = FactorPair(
        truth.u + rng.normal(0, 0.6, truth.u.shape),
        truth.v + rng.normal(0, 0.6, truth.v.shape),
    )
    rows0 = list(init.u) + list(init.v)
    before = sum(1 for row in rows0 if _component_count(row, h.tau2) <= 3)
    factors, _ = fit(yc, 6, h, init=init)
    rows = list(factors.u) + list(factors.v)
    ok = sum(1 for row in rows if _component_count(row, h.tau2) <= 3)  # G + 1
    assert before < 0.7 * len(rows0)  # the start really is ungrouped
    assert ok >= 0.8 * len(rows)


# ---------------------------------------------------------------- reconstruct

def test_reconstruct_zero_factor():
    f = FactorPair(np.zeros((3, 1)), np.ones((4, 1)))
    assert np.array_equal(reconstruct(f), np.zeros((3, 4)))


def test_reconstruct_outer_product():
    f = FactorPair(np.array([[1.0], [2.0]]), np.array([[3.0], [4.0]]))
    assert np.array_equal(reconstruct(f), np.array([[3.0, 4.0], [6.0, 8.0]]))


def test_reconstruct_matches_triple_loop():
    rng = np.random.default_rng(10)
    u = rng.normal(size=(5, 2))
    v = rng.normal(size=(4, 2))
    expected = np.zeros((5, 4))
    for i in range(5):
        for j in range(4):
            for k in range(2):
                expected[i, j] += u[i, k] * v[j, k]
    assert np.abs(reconstruct(FactorPair(u, v)) - expected).max() <= 1e-12


# ---------------------------------------------------------------- fit_grown

def test_fit_grown_deterministic_and_shaped():
    rng = np.random.default_rng(11)
    Y = np.abs(rng.normal(size=(12, 10))) * 30
    h = small_hyper(tau1=1.0, tau2=1.0)
    a, _ = fit_grown(Y, 3, h, seed=5)
    b, _ = fit_grown(Y, 3, h, seed=5)
    assert a.u.shape == (12, 3) and a.v.shape == (10, 3)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)


def test_fit_grown_orients_columns_positively():
    rng = np.random.default_rng(12)
    Y = np.abs(rng.normal(size=(10, 9))) * 25
    factors, _ = fit_grown(Y, 2, small_hyper(tau1=1.0, tau2=1.0), seed=2)
    for k in range(2):
        neg = np.minimum(factors.u[:, k], 0) ** 2
        negv = np.minimum(factors.v[:, k], 0) ** 2
        pos = np.minimum(-factors.u[:, k], 0) ** 2
        posv = np.minimum(-factors.v[:, k], 0) ** 2
        assert neg.sum() + negv.sum() <= pos.sum() + posv.sum()


def test_default_image_hyper_recipe():
    Y = np.full((4, 4), 100.0)
    h = default_image_hyper(Y)
    assert h.tau1 == pytest.approx(0.5, rel=1e-12)
    assert h.tau2 == h.tau1
    assert h.lam1 == 1.0 and h.lam2 == 1.0 and h.lam3 == 1e-3
    h2 = default_image_hyper(Y, "ngrmf", lam2=3.0)
    assert h2.variant == "ngrmf" and h2.lam2 == 3.0
