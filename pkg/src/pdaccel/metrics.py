"""Pseudo duality gap, dB reporting, run records, ergodic averages and rate fits."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import copy, norm

RECORD_COLUMNS = ("iter", "time_s", "gap_db", "target_db", "value_db", "tau", "tau_perp", "sigma", "M")

# dual iterates further than this outside their ball indicate a solver bug
DUAL_TOL = 1e-9


class GapWarning(UserWarning):
    """The bound M does not dominate the constrained part of x."""


def decibels(v: float, v0: float) -> float:
    """``10 log10(v^2 / v0^2)``; ``v = 0`` gives ``-inf``."""
    if v0 == 0:
        raise ValueError("reference value must be nonzero")
    if v == 0:
        return -math.inf
    return 10.0 * math.log10((v * v) / (v0 * v0))


def gap_parts(problem, x, y) -> tuple[float, float, float]:
    """``(offset, slope, constrained_norm)`` with ``gap(M) = offset + M * slope``.

    ``offset`` collects ``G(x) + F(Kx)`` and the ``M``-independent part of
    ``G_M*(-K* y)``; ``F*(y)`` vanishes for feasible ``y``.
    """
    excess = problem.dual_excess(y)
    scale = max(1.0, problem.alpha, problem.beta or 0.0)
    if excess > DUAL_TOL * scale:
        raise ValueError(f"dual iterate lies outside its ball by {excess:.3g}")
    base, slope = problem.conj_terms(-problem.K.adjoint(y))
    return problem.primal_value(x) + base, slope, problem.constrained_norm(x)


def pseudo_gap(problem, x, y, M: float) -> float:
    """Duality gap of the problem with the extra constraint ``|Q_perp x| <= M``."""
    if M < 0:
        raise ValueError("M must be non-negative")
    offset, slope, cnorm = gap_parts(problem, x, y)
    if cnorm > M * (1 + 1e-12) + 1e-300:
        warnings.warn(
            f"M = {M:.6g} is below |Q_perp x| = {cnorm:.6g}; the gap may be negative",
            GapWarning,
            stacklevel=2,
        )
    return offset + M * slope


@dataclass
class GapState:
    """Dynamic bound ``M`` plus ergodic accumulators for one run."""

    M: float = 0.0
    safety: float = 1.1
    history: list = field(default_factory=list)
    x_acc: object = None
    y_acc: object = None
    q_tilde: float = 0.0
    q_hat: float = 0.0
    count: int = 0

    def __post_init__(self):
        if self.safety < 1:
            raise ValueError("safety must be >= 1")

    @property
    def x_avg(self):
        return None if self.x_acc is None else self.x_acc / self.q_tilde

    @property
    def y_avg(self):
        return None if self.y_acc is None else self.y_acc / self.q_hat

    def ergodic_gap(self, problem, M: float | None = None) -> float:
        if self.count == 0:
            raise ValueError("no iterates accumulated")
        return pseudo_gap(problem, self.x_avg, self.y_avg, self.M if M is None else M)


def update_M(gs: GapState, x, problem) -> GapState:
    """Raise ``M`` to ``safety * |Q_perp x|`` when needed."""
    gs.M = max(gs.M, gs.safety * problem.constrained_norm(x))
    gs.history.append(gs.M)
    return gs


def merge_M(*states: GapState) -> float:
    return max((s.M for s in states), default=0.0)


def ergodic_update(gs: GapState, x_new, y_new, state, next_state=None) -> GapState:
    """Add ``x^{i+1}`` with weight ``1/tau~_i`` and ``y^{i+1}`` with ``1/tau~_{i+1}``.

    ``state`` is the schedule state of iteration ``i``; ``next_state`` that
    of ``i + 1`` (defaults to ``state`` for schedules with fixed ``tau~``).
    """
    wx = 1.0 / state.tau_tilde
    wy = 1.0 / (next_state or state).tau_tilde
    if gs.x_acc is None:
        gs.x_acc, gs.y_acc = copy(x_new) * wx, copy(y_new) * wy
    else:
        gs.x_acc = gs.x_acc + wx * x_new
        gs.y_acc = gs.y_acc + wy * y_new
    gs.q_tilde += wx
    gs.q_hat += wy
    gs.count += 1
    return gs


@dataclass
class RunRecord:
    """Metric rows of one run, one per evaluation stride.

    ``parts`` keeps ``(offset, slope)`` of each gap evaluation, so the gap
    column can be recomputed for a different ``M``.
    """

    label: str = ""
    rows: list = field(default_factory=list)
    parts: list = field(default_factory=list)
    error: str | None = None

    def append(self, row: dict, part=None):
        if self.rows:
            last = self.rows[-1]
            if row["iter"] <= last["iter"]:
                raise ValueError("iterations must increase")
            if row["time_s"] < last["time_s"]:
                raise ValueError("wall time must not decrease")
        self.rows.append({k: row.get(k, math.nan) for k in RECORD_COLUMNS})
        self.parts.append(part)

    def __len__(self):
        return len(self.rows)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def without_time(self) -> list:
        return [{k: v for k, v in r.items() if k != "time_s"} for r in self.rows]

    def regap(self, M: float) -> None:
        """Recompute ``gap_db`` and the ``M`` column with a common bound."""
        if not self.parts or self.parts[0] is None:
            return
        g0 = self.parts[0][0] + M * self.parts[0][1]
        for row, (offset, slope) in zip(self.rows, self.parts):
            row["gap_db"] = decibels(offset + M * slope, g0) if g0 != 0 else math.nan
            row["M"] = M

    def first_reaching(self, name: str, threshold: float):
        """First row whose ``name`` value is at most ``threshold``, or ``None``."""
        for r in self.rows:
            v = r[name]
            if not math.isnan(v) and v <= threshold:
                return r
        return None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RECORD_COLUMNS)
            for r in self.rows:
                w.writerow([int(r["iter"])] + [_fmt(r[k]) for k in RECORD_COLUMNS[1:]])

    @classmethod
    def from_csv(cls, path, label: str = "") -> "RunRecord":
        rec = cls(label)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            for r in reader:
                rec.rows.append({k: (int(r[k]) if k == "iter" else float(r[k])) for k in RECORD_COLUMNS})
                rec.parts.append(None)
        return rec


def _fmt(v: float) -> str:
    return f"{v:.12g}"


class Monitor:
    """Evaluates metrics for :func:`pdaccel.solver.run` at each stride.

    ``target`` is a reference solution ``x_hat``; without it the target and
    value columns stay NaN.
    """

    def __init__(self, problem, target=None, gapstate: GapState | None = None, track_ergodic=False, label=""):
        self.problem = problem
        self.target = target
        self.target_norm = norm(target) if target is not None else math.nan
        self.target_value = problem.primal_value(target) if target is not None else math.nan
        self.gs = gapstate or GapState()
        self.track_ergodic = track_ergodic
        self.record = RunRecord(label)
        self.gap0 = None
        self.metric_time = 0.0

    def evaluate(self, i, x, y, state, elapsed) -> dict:
        update_M(self.gs, x, self.problem)
        offset, slope, _ = gap_parts(self.problem, x, y)
        gap = offset + self.gs.M * slope
        if self.gap0 is None:
            self.gap0 = gap
        row = {
            "iter": i,
            "time_s": elapsed,
            "gap_db": decibels(gap, self.gap0) if self.gap0 != 0 else math.nan,
            "tau": state.tau,
            "tau_perp": state.tau_perp,
            "sigma": state.sigma,
            "M": self.gs.M,
        }
        if self.target is not None:
            d = norm(x - self.target)
            row["target_db"] = decibels(d, self.target_norm) if self.target_norm else math.nan
            if self.target_value:
                row["value_db"] = decibels(self.problem.primal_value(x), self.target_value)
        self.record.append(row, (offset, slope))
        return row


def fit_rate(ns, values, window: tuple[float, float] | None = None) -> float:
    """Least-squares slope of ``log(value)`` against ``log(N)``.

    Non-positive values are dropped; at least ten samples must remain inside
    ``window = (N_min, N_max)``.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = (values > 0) & (ns > 0) & np.isfinite(values)
    if window is not None:
        keep &= (ns >= window[0]) & (ns <= window[1])
    if keep.sum() < 10:
        raise ValueError(f"need at least 10 positive samples, got {int(keep.sum())}")
    slope, _ = np.polyfit(np.log(ns[keep]), np.log(values[keep]), 1)
    return float(slope)
