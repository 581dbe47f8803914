import math
import warnings

import numpy as np
import pytest

from pdaccel import core, metrics, problems, schedules
from pdaccel.core import StackedVar
from pdaccel.metrics import GapState, GapWarning, RunRecord
from pdaccel.prox import project_linf_ball

import oracles


def _feasible_dual(shape, radius, rng):
    return project_linf_ball(3 * radius * rng.standard_normal(shape), radius)


def test_decibels():
    assert metrics.decibels(1.0, 1.0) == 0.0
    assert metrics.decibels(0.1, 1.0) == pytest.approx(-20.0)
    assert metrics.decibels(0.0, 1.0) == -math.inf
    with pytest.raises(ValueError):
        metrics.decibels(1.0, 0.0)


def _dense_tv_gap(x, y, f, alpha, A, M=0.0, null=None):
    D = oracles.grad_matrix(*x.shape)
    z = -(D.T @ y.reshape(-1))
    return oracles.tv_value(x, f, alpha, A) + oracles.quad_conjugate(z, A, f.ravel(), null, M)


def test_gap_denoise_matches_dense():
    rng = np.random.default_rng(0)
    f, x = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    y = _feasible_dual((2, 4, 4), 0.7, rng)
    p = problems.build_tv_denoise(f, 0.7)
    ref = _dense_tv_gap(x, y, f, 0.7, np.eye(16))
    assert metrics.pseudo_gap(p, x, y, 0.0) == pytest.approx(ref, rel=1e-10)


def test_gap_deblur_matches_dense_with_zero_set():
    rng = np.random.default_rng(1)
    f, x = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    p = problems.build_tv_deblur(f, width=1.2, alpha=0.5, projector_rel=0.3, zero_rel=0.5)
    sup = p.info["support"]
    assert (~sup).any()
    x = x - p.constrained_part(x) + 0.2 * p.constrained_part(x) / max(p.constrained_norm(x), 1e-300)
    y = _feasible_dual((2, 4, 4), 0.5, rng)
    Ag = oracles.multiplier_matrix(p.info["a_gap"])
    null = oracles.null_basis(Ag)
    assert null.shape[1] == int((~sup).sum())
    M = 0.3
    ref = _dense_tv_gap(x, y, f, 0.5, Ag, M, null)
    assert metrics.pseudo_gap(p, x, y, M) == pytest.approx(ref, rel=1e-9)


def test_gap_inpaint_matches_dense():
    rng = np.random.default_rng(2)
    f, x = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    mask = rng.random((4, 4)) < 0.5
    p = problems.build_tv_inpaint(f, mask, 0.9)
    y = _feasible_dual((2, 4, 4), 0.9, rng)
    S = np.eye(16)[mask.ravel()]
    null = np.eye(16)[:, ~mask.ravel()]
    M = 1.5 * p.constrained_norm(x)
    D = oracles.grad_matrix(4, 4)
    z = -(D.T @ y.reshape(-1))
    value = 0.5 * np.sum((S @ (f - x).ravel()) ** 2) + 0.9 * np.sum(np.sqrt(((D @ x.ravel()).reshape(2, -1) ** 2).sum(0)))
    ref = value + oracles.quad_conjugate(z, S, S @ f.ravel(), null, M)
    assert metrics.pseudo_gap(p, x, y, M) == pytest.approx(ref, rel=1e-10)


def test_gap_tgv_matches_dense():
    rng = np.random.default_rng(3)
    f = rng.standard_normal((4, 4))
    p = problems.build_tgv2_denoise(f, 0.8, 1.1)
    x = StackedVar(rng.standard_normal((4, 4)), rng.standard_normal((2, 4, 4)))
    y = StackedVar(_feasible_dual((2, 4, 4), 0.8, rng), _feasible_dual((3, 4, 4), 1.1, rng))
    M = 2.0 * p.constrained_norm(x)
    z = -core.flatten(p.K.adjoint(y))
    A = np.hstack([np.eye(16), np.zeros((16, 32))])
    null = np.vstack([np.zeros((16, 32)), np.eye(32)])
    ref = p.primal_value(x) + oracles.quad_conjugate(z, A, f.ravel(), null, M)
    assert metrics.pseudo_gap(p, x, y, M) == pytest.approx(ref, rel=1e-10)


def test_gap_lasso_matches_dense():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((4, 7))
    f = rng.standard_normal(4)
    p = problems.build_lasso(A, f, 0.6)
    x = rng.standard_normal(7)
    y = np.clip(rng.standard_normal(7), -0.6, 0.6)
    M = 1.5 * p.constrained_norm(x)
    ref = 0.5 * np.sum((f - A @ x) ** 2) + 0.6 * np.sum(np.abs(x))
    ref += oracles.quad_conjugate(-y, A, f, oracles.null_basis(A), M)
    assert metrics.pseudo_gap(p, x, y, M) == pytest.approx(ref, rel=1e-10)


def test_gap_is_zero_at_saddle_point():
    x, y, f = oracles.tv_saddle_point(6, 1.5)
    p = problems.build_tv_denoise(f, 1.5)
    g = metrics.pseudo_gap(p, x, y, 0.0)
    assert abs(g) <= 1e-10 * max(1.0, p.primal_value(x))


def test_gap_monotone_in_M_and_warns():
    rng = np.random.default_rng(5)
    mask = rng.random((6, 6)) < 0.5
    p = problems.build_tv_inpaint(rng.standard_normal((6, 6)), mask, 1.0)
    x = rng.standard_normal((6, 6))
    y = _feasible_dual((2, 6, 6), 1.0, rng)
    c = p.constrained_norm(x)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gaps = [metrics.pseudo_gap(p, x, y, M) for M in (c, 2 * c, 4 * c)]
    assert gaps[0] <= gaps[1] <= gaps[2]
    with pytest.warns(GapWarning):
        metrics.pseudo_gap(p, x, y, 0.5 * c)
    with pytest.raises(ValueError):
        metrics.pseudo_gap(p, x, y, -1.0)


def test_gap_rejects_infeasible_dual():
    p = problems.build_tv_denoise(np.zeros((4, 4)), 1.0)
    y = np.zeros((2, 4, 4))
    y[0, 1, 1] = 1.0 + 1e-6
    with pytest.raises(ValueError):
        metrics.pseudo_gap(p, np.zeros((4, 4)), y, 0.0)
    y[0, 1, 1] = 1.0 + 1e-12
    metrics.pseudo_gap(p, np.zeros((4, 4)), y, 0.0)


def test_update_M_is_monotone():
    p = problems.build_tgv2_denoise(np.zeros((3, 3)))
    gs = GapState()
    big = StackedVar(np.zeros((3, 3)), np.ones((2, 3, 3)))
    small = StackedVar(np.zeros((3, 3)), 0.1 * np.ones((2, 3, 3)))
    metrics.update_M(gs, big, p)
    assert gs.M == pytest.approx(1.1 * core.norm(big[1]))
    metrics.update_M(gs, small, p)
    assert gs.M == pytest.approx(1.1 * core.norm(big[1]))
    assert gs.history[0] == gs.history[1]
    other = GapState(M=7.0)
    assert metrics.merge_M(gs, other) == 7.0
    with pytest.raises(ValueError):
        GapState(safety=0.5)


def _state(tt):
    return schedules.StepState(i=0, tau=1.0, tau_perp=1.0, tau_tilde=tt, sigma=1.0)


def test_ergodic_averages():
    gs = GapState()
    metrics.ergodic_update(gs, np.array([2.0]), np.array([4.0]), _state(0.5))
    assert gs.x_avg[0] == 2.0 and gs.y_avg[0] == 4.0

    gs = GapState()
    xs = [np.array([float(k)]) for k in range(5)]
    for x in xs:
        metrics.ergodic_update(gs, x, x, _state(0.3))
    assert gs.x_avg[0] == pytest.approx(2.0) and gs.y_avg[0] == pytest.approx(2.0)

    gs = GapState()
    tts = [1.0, 0.5, 0.25, 0.125]
    vals = [1.0, 3.0, -2.0, 5.0]
    for k in range(3):
        metrics.ergodic_update(gs, np.array([vals[k]]), np.array([vals[k]]), _state(tts[k]), _state(tts[k + 1]))
    wx = np.array([1 / t for t in tts[:3]])
    wy = np.array([1 / t for t in tts[1:]])
    assert gs.x_avg[0] == pytest.approx(wx @ vals[:3] / wx.sum())
    assert gs.y_avg[0] == pytest.approx(wy @ vals[:3] / wy.sum())
    assert min(vals[:3]) <= gs.x_avg[0] <= max(vals[:3])
    with pytest.raises(ValueError):
        GapState().ergodic_gap(None)


def test_fit_rate():
    ns = np.arange(1, 101)
    assert metrics.fit_rate(ns, 3.0 / ns**2) == pytest.approx(-2.0, abs=1e-12)
    assert metrics.fit_rate(ns, 5.0 / ns, window=(10, 100)) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ValueError):
        metrics.fit_rate(ns[:5], 1.0 / ns[:5])
    vals = 1.0 / ns
    vals[::2] = 0.0
    assert metrics.fit_rate(ns, vals) == pytest.approx(-1.0, abs=1e-12)


def _record():
    rec = RunRecord("a")
    rec.append({"iter": 0, "time_s": 0.0, "gap_db": 0.0, "tau": 0.1, "tau_perp": 0.1, "sigma": 1.0, "M": 0.0}, (4.0, 1.0))
    rec.append({"iter": 10, "time_s": 0.5, "gap_db": -10.0, "tau": 0.1, "tau_perp": 0.1, "sigma": 1.0, "M": 0.0}, (0.4, 0.1))
    return rec


def test_run_record_csv_roundtrip(tmp_path):
    rec = _record()
    rec.to_csv(tmp_path / "r.csv")
    back = RunRecord.from_csv(tmp_path / "r.csv")
    for a, b in zip(rec.rows, back.rows):
        for k in metrics.RECORD_COLUMNS:
            assert (math.isnan(a[k]) and math.isnan(b[k])) or a[k] == pytest.approx(b[k], rel=1e-11)
    (tmp_path / "bad.csv").write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        RunRecord.from_csv(tmp_path / "bad.csv")


def test_run_record_ordering_and_queries():
    rec = _record()
    with pytest.raises(ValueError):
        rec.append({"iter": 10, "time_s": 1.0})
    with pytest.raises(ValueError):
        rec.append({"iter": 20, "time_s": 0.1})
    assert rec.first_reaching("gap_db", -5.0)["iter"] == 10
    assert rec.first_reaching("gap_db", -50.0) is None
    rec.regap(10.0)
    assert rec.rows[1]["gap_db"] == pytest.approx(metrics.decibels(0.4 + 1.0, 4.0 + 10.0))
    assert rec.column("M").tolist() == [10.0, 10.0]
    assert all("time_s" not in r for r in rec.without_time())


def test_monitor_records_rows():
    f = np.random.default_rng(6).standard_normal((5, 5))
    p = problems.build_tv_denoise(f, 0.5)
    mon = metrics.Monitor(p, target=f)
    st = schedules.initial_state(schedules.ScheduleParams("basic", tau0=0.1))
    row = mon.evaluate(0, np.zeros((5, 5)), np.zeros((2, 5, 5)), st, 0.0)
    assert row["gap_db"] == 0.0 and row["target_db"] == 0.0
    row = mon.evaluate(1, f, np.zeros((2, 5, 5)), st, 0.1)
    assert row["target_db"] == -math.inf
    assert len(mon.record) == 2
