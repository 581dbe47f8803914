"""The primal-dual loop.

One iteration with ``T = tau P + tau_perp (I - P)``::

    x'   = (I + T dG)^-1 (x - T K* y)
    xbar = theta (x' - x) + x'
    y'   = (I + sigma dF*)^-1 (y + sigma K xbar)

where ``sigma`` is the schedule's ``sigma_{i+1}`` and ``theta`` its ``omega_i``
(``omega~_i`` for the dual-penalty-only schedules).
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

from . import schedules
from .core import StackedVar, all_finite, norm
from .imageio import write_pgm
from .metrics import Monitor, RunRecord, ergodic_update
from .schedules import ScheduleParams, StepState


class SolverError(RuntimeError):
    """Non-finite values produced by a resolvent."""


class DivergenceError(SolverError):
    """Primal iterate exceeded the divergence guard."""


@dataclass(frozen=True)
class IterSteps:
    tau: float
    tau_perp: float
    sigma: float
    theta: float


@dataclass
class IterationHooks:
    eval_every: int = 10
    callbacks: list = field(default_factory=list)  # f(i, x, y, state)

    def __post_init__(self):
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


def iter_steps(cur: StepState, nxt: StepState, params: ScheduleParams) -> IterSteps:
    """Steps used by iteration ``i`` from the states at ``i`` and ``i + 1``."""
    theta = nxt.omega_tilde if params.overrelax_uses_omega_tilde else nxt.omega
    return IterSteps(cur.tau, cur.tau_perp, nxt.sigma, theta)


def pdhgm_iterate(x, y, steps: IterSteps, problem):
    K = problem.K
    v = x - problem.step_T(K.adjoint(y), steps.tau, steps.tau_perp)
    x_new = problem.prox_g(v, steps.tau, steps.tau_perp)
    if not all_finite(x_new):
        raise SolverError("primal resolvent produced non-finite values")
    x_bar = steps.theta * (x_new - x) + x_new
    y_new = problem.prox_fstar(y + steps.sigma * K(x_bar), steps.sigma)
    if not all_finite(y_new):
        raise SolverError("dual resolvent produced non-finite values")
    return x_new, y_new


def relaxed_iterate(x, y, steps: IterSteps, problem, rho: float):
    """Basic step followed by ``u' = (1 - rho) u + rho u~`` on both variables.

    Returns ``(x', y', x~, y~)``; for ``rho > 1`` only the resolvent outputs
    ``(x~, y~)`` are guaranteed feasible, so metrics are evaluated there.
    """
    if not 0 < rho < 2:
        raise ValueError("relaxation parameter must lie in (0, 2)")
    xt, yt = pdhgm_iterate(x, y, steps, problem)
    if rho == 1:
        return xt, yt, xt, yt
    return (1 - rho) * x + rho * xt, (1 - rho) * y + rho * yt, xt, yt


def relaxed_wrap(problem, params: ScheduleParams, **kw):
    """:func:`run` with the over-relaxed fixed-step baseline."""
    if params.variant != "relaxed":
        params = schedules.with_variant(params, "relaxed")
    return run(problem, params, **kw)


def run(
    problem,
    params: ScheduleParams,
    x0=None,
    y0=None,
    iters: int = 100,
    hooks: IterationHooks | None = None,
    monitor: Monitor | None = None,
    stop_gap_db: float | None = None,
    checkpoint: Callable | None = None,
):
    """Iterate ``iters`` times and return ``(x, y, RunRecord)``.

    Metrics (through ``monitor``) and callbacks run at iteration 0, every
    ``hooks.eval_every`` iterations and at the end; their cost is excluded
    from the recorded wall time. ``stop_gap_db`` stops at the first
    evaluation whose gap is at or below that level.
    """
    if iters < 0:
        raise ValueError("iters must be non-negative")
    hooks = hooks or IterationHooks()
    x = problem.zeros_primal() if x0 is None else x0
    y = problem.zeros_dual() if y0 is None else y0
    state = schedules.initial_state(params)
    guard = 1e12 * (1.0 + problem.data_norm)
    record = monitor.record if monitor is not None else RunRecord()
    relaxed = params.variant == "relaxed"
    ergodic = monitor is not None and monitor.track_ergodic
    elapsed = 0.0

    xe, ye = x, y  # evaluation point

    def observe(i):
        for cb in hooks.callbacks:
            cb(i, x, y, state)
        if checkpoint is not None:
            checkpoint(i, x, y, state)
        if monitor is not None:
            row = monitor.evaluate(i, xe, ye, state, elapsed)
            return stop_gap_db is not None and row["gap_db"] <= stop_gap_db
        return False

    if observe(0) or iters == 0:
        return x, y, record
    for i in range(iters):
        t0 = time.perf_counter()
        nxt = schedules.step(state, params)
        steps = iter_steps(state, nxt, params)
        if relaxed:
            x_new, y_new, xe, ye = relaxed_iterate(x, y, steps, problem, params.relax)
        else:
            x_new, y_new = xe, ye = pdhgm_iterate(x, y, steps, problem)
        nx = norm(x_new)
        elapsed += time.perf_counter() - t0
        if not nx <= guard:
            raise DivergenceError(f"|x| = {nx:.3g} exceeds {guard:.3g} at iteration {i + 1}")
        if ergodic:
            ergodic_update(monitor.gs, xe, ye, state, nxt)
        x, y, state = x_new, y_new, nxt
        if (i + 1) % hooks.eval_every == 0 or i + 1 == iters:
            if observe(i + 1):
                break
    return x, y, record


def image_part(x):
    """The scalar image carried by a primal variable."""
    return x[0] if isinstance(x, StackedVar) else x


def dump_checkpoint(directory, i: int, x, state: StepState, label: str = "x") -> str:
    """Write ``x`` as a 16-bit PGM and a JSON sidecar with the step state."""
    os.makedirs(directory, exist_ok=True)
    stem = os.path.join(directory, f"{label}_{i:07d}")
    img = image_part(x)
    if getattr(img, "ndim", 0) == 2:
        write_pgm(stem + ".pgm", img, bits=16)
    with open(stem + ".json", "w") as fh:
        json.dump({"iteration": i, "state": asdict(state)}, fh, indent=2)
    return stem
