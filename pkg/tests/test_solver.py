import json
import math

import numpy as np
import pytest

from pdaccel import core, metrics, problems, schedules, solver
from pdaccel.core import StackedVar
from pdaccel.schedules import ScheduleParams
from pdaccel.solver import IterSteps

import oracles


def test_basic_step_matches_textbook_lasso():
    rng = np.random.default_rng(0)
    A = np.array([[1.0, 0.5], [0.2, 2.0]])
    f = rng.standard_normal(2)
    p = problems.build_lasso(A, f, 0.3)
    x, y = rng.standard_normal(2), np.clip(rng.standard_normal(2), -0.3, 0.3)
    for _ in range(5):
        got = solver.pdhgm_iterate(x, y, IterSteps(0.4, 0.4, 2.0, 1.0), p)
        ref = oracles.reference_pdhgm_step(x, y, A, f, 0.3, 0.4, 2.0)
        assert np.max(np.abs(got[0] - ref[0])) <= 1e-12
        assert np.max(np.abs(got[1] - ref[1])) <= 1e-12
        x, y = ref


def test_basic_step_matches_dense_tv():
    rng = np.random.default_rng(1)
    f = rng.standard_normal((5, 4))
    p = problems.build_tv_denoise(f, 0.8)
    x, y = rng.standard_normal((5, 4)), np.zeros((2, 5, 4))
    for theta in (1.0, 0.7):
        got = solver.pdhgm_iterate(x, y, IterSteps(0.3, 0.3, 0.4, theta), p)
        ref = oracles.reference_tv_step(x, y, f, 0.8, 0.3, 0.4, theta)
        assert np.max(np.abs(got[0] - ref[0])) <= 1e-12
        assert np.max(np.abs(got[1] - ref[1])) <= 1e-12


def _dense_matrix(op, shapes):
    sizes = [int(np.prod(s)) for s in shapes]
    n = sum(sizes)
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        parts = np.split(e, np.cumsum(sizes)[:-1])
        cols.append(core.flatten(op(StackedVar(*(q.reshape(s) for q, s in zip(parts, shapes))))))
    return np.array(cols).T


def test_tgv_split_resolvent_matches_joint_dense():
    rng = np.random.default_rng(2)
    f = rng.standard_normal((4, 4))
    p = problems.build_tgv2_denoise(f, 0.5, 0.6)
    shape = p.K.dom_shape
    x = StackedVar(rng.standard_normal((4, 4)), rng.standard_normal((2, 4, 4)))
    y = p.prox_fstar(StackedVar(rng.standard_normal((2, 4, 4)), rng.standard_normal((3, 4, 4))), 1.0)
    tau, tau_perp, sigma = 0.7, 0.2, 0.3
    x_new, _ = solver.pdhgm_iterate(x, y, IterSteps(tau, tau_perp, sigma, 1.0), p)

    K = _dense_matrix(p.K, shape)
    n = K.shape[1]
    H = np.diag(np.r_[np.ones(16), np.zeros(32)])
    T = np.diag(np.r_[np.full(16, tau), np.full(32, tau_perp)])
    b = np.r_[f.ravel(), np.zeros(32)]
    # the symmetric-tensor block counts its off-diagonal entry twice
    W = np.diag(np.r_[np.ones(32 + 32), np.full(16, 2.0)])
    v = core.flatten(x) - T @ (K.T @ W @ core.flatten(y))
    dense = np.linalg.solve(np.eye(n) + T @ H, v + T @ b)
    assert np.max(np.abs(core.flatten(x_new) - dense)) <= 1e-10


@pytest.mark.parametrize("variant", ["basic", "relaxed", "cp_accel", "alg4_printed"])
def test_saddle_point_is_fixed(variant):
    x, y, f = oracles.tv_saddle_point(6, 1.5, seed=3)
    p = problems.build_tv_denoise(f, 1.5)
    params = schedules.default_params(variant, 8.0, gamma=0.5)
    xn, yn, _ = solver.run(p, params, x0=x, y0=y, iters=20)
    assert core.norm(xn - x) <= 1e-10 * core.norm(x)
    assert core.norm(yn - y) <= 1e-10 * core.norm(y)


def _denoise(n=32, seed=0):
    clean = core.phantom(n)
    return problems.build_tv_denoise(core.gaussian_noise(clean, 6.15, seed), 2.55)


def test_gap_decreases_from_zero_init():
    p = _denoise()
    mon = metrics.Monitor(p)
    solver.run(p, schedules.default_params("basic", 8.0), iters=100, monitor=mon)
    gaps = mon.record.column("gap_db")
    assert gaps[-1] < gaps[0] == 0.0


def test_zero_iterations_returns_inputs():
    p = _denoise(8)
    x0, y0 = np.ones((8, 8)), np.zeros((2, 8, 8))
    seen = []
    hooks = solver.IterationHooks(callbacks=[lambda i, x, y, s: seen.append(i)])
    x, y, rec = solver.run(p, schedules.default_params("alg3", 8.0), x0=x0, y0=y0, iters=0, hooks=hooks)
    assert x is x0 and y is y0 and len(rec) == 0 and seen == [0]
    with pytest.raises(ValueError):
        solver.run(p, schedules.default_params("alg3", 8.0), iters=-1)


def test_runs_are_deterministic():
    p = _denoise(16)
    recs = []
    for _ in range(2):
        mon = metrics.Monitor(p, target=p.f)
        solver.run(p, schedules.default_params("alg3", 8.0), iters=60, monitor=mon)
        recs.append(mon.record.without_time())
    assert recs[0] == recs[1]


def test_hooks_stride_and_end():
    p = _denoise(8)
    seen = []
    hooks = solver.IterationHooks(eval_every=7, callbacks=[lambda i, x, y, s: seen.append(i)])
    solver.run(p, schedules.default_params("basic", 8.0), iters=20, hooks=hooks)
    assert seen == [0, 7, 14, 20]
    with pytest.raises(ValueError):
        solver.IterationHooks(eval_every=0)


def test_relaxed_with_unit_rho_equals_basic():
    p = _denoise(16)
    base = schedules.default_params("basic", 8.0)
    xa, ya, _ = solver.run(p, base, iters=30)
    xb, yb, _ = solver.relaxed_wrap(p, schedules.with_variant(base, "relaxed", relax=1.0), iters=30)
    assert np.array_equal(xa, xb) and np.array_equal(ya, yb)


def test_relaxed_rejects_bad_rho():
    p = _denoise(4)
    with pytest.raises(ValueError):
        solver.relaxed_iterate(np.zeros((4, 4)), np.zeros((2, 4, 4)), IterSteps(0.1, 0.1, 0.1, 1.0), p, 2.0)
    with pytest.raises(schedules.ScheduleError):
        ScheduleParams("relaxed", tau0=0.1, relax=0.0)


def test_relaxed_not_slower_than_basic_on_denoising():
    p = _denoise(64, seed=1)
    hits = {}
    for v in ("basic", "relaxed"):
        mon = metrics.Monitor(p)
        solver.run(p, schedules.default_params(v, 8.0), iters=2000, monitor=mon, stop_gap_db=-50.0)
        row = mon.record.first_reaching("gap_db", -50.0)
        assert row is not None
        hits[v] = row["iter"]
    assert hits["relaxed"] <= hits["basic"]


def test_early_stop():
    p = _denoise(16)
    mon = metrics.Monitor(p)
    solver.run(p, schedules.default_params("alg3", 8.0), iters=5000, monitor=mon, stop_gap_db=-20.0)
    assert mon.record.rows[-1]["gap_db"] <= -20.0
    assert mon.record.rows[-1]["iter"] < 5000


def test_divergence_guard():
    # bounded duals keep the bundled problems stable; an expanding resolvent must trip the guard
    p = _denoise(8)
    expanding = problems.replace(p, prox_g=lambda v, tau, tau_perp=None: 10.0 * v + 1.0)
    with pytest.raises(solver.DivergenceError):
        solver.run(expanding, schedules.default_params("basic", 8.0), iters=100)


def test_non_finite_resolvent_aborts():
    p = _denoise(4)
    broken = problems.replace(p, prox_g=lambda v, tau, tau_perp=None: v * math.nan)
    with pytest.raises(solver.SolverError):
        solver.run(broken, schedules.default_params("basic", 8.0), iters=1)


def test_checkpoint_dump(tmp_path):
    p = _denoise(8)
    params = schedules.default_params("alg3", 8.0)
    solver.run(p, params, iters=20, hooks=solver.IterationHooks(eval_every=10),
               checkpoint=lambda i, x, y, s: solver.dump_checkpoint(tmp_path, i, x, s))
    files = sorted(f.name for f in tmp_path.iterdir())
    assert "x_0000010.pgm" in files and "x_0000020.json" in files
    meta = json.loads((tmp_path / "x_0000020.json").read_text())
    assert meta["iteration"] == 20 and meta["state"]["i"] == 20
    tgv = problems.build_tgv2_denoise(np.zeros((4, 4)))
    stem = solver.dump_checkpoint(tmp_path, 1, tgv.zeros_primal(), schedules.initial_state(params), "tgv")
    assert (tmp_path / "tgv_0000001.pgm").exists() and stem.endswith("tgv_0000001")
