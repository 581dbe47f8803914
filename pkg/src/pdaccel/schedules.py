"""Scalar step-length schedules and the per-iteration feasibility ledger.

Every schedule advances the triple ``(tau, tau_perp, tau_tilde)``: ``tau``
is the primal step on the strongly convex subspace ``range(P)``, ``tau_perp``
the step on its complement and ``tau_tilde`` the testing weight that only
enters rate estimates and ergodic averages. The dual step follows

    1/sigma_{i+1} = omega_decay / (1 - delta)
                    * (max(0, tau_i - tau_perp_i) |KP|^2 + tau_perp_i |K|^2).

Variants
--------
``basic``, ``relaxed``
    fixed steps (unaccelerated PDHGM, optionally with over-relaxation).
``cp_accel``
    ``omega = 1/sqrt(1 + 2 gamma tau)`` on the whole space.
``alg3``
    partial acceleration with primal and dual penalties; ``tau_perp``
    solves a quadratic balancing the two penalties via ``zeta``.
``alg4_printed``, ``alg4_sqrt``
    partial acceleration with a dual penalty only, driven by the sequence
    ``a_i = tau_tilde0^-2 ((i+1)^q - i^q)``. The ``printed`` form uses
    ``omega_tilde = 1/(1 + a tau_tilde^2)``, the ``sqrt`` form
    ``1/sqrt(1 + a tau_tilde^2)``, which makes ``tau_tilde^-2`` telescope.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

VARIANTS = ("basic", "cp_accel", "alg3", "alg4_printed", "alg4_sqrt", "relaxed")
ALG4 = ("alg4_printed", "alg4_sqrt")

TRACE_COLUMNS = (
    "i",
    "tau",
    "tau_perp",
    "tau_tilde",
    "sigma",
    "omega",
    "omega_tilde",
    "omega_perp",
    "gamma_perp",
    "rho",
)


class ScheduleError(ValueError):
    """Invalid or infeasible schedule parameters."""


@dataclass(frozen=True)
class ScheduleParams:
    variant: str
    tau0: float
    delta: float = 0.01
    gamma: float = 0.0
    norm_sq_K: float = 8.0
    norm_sq_KP: float | None = None
    tau_perp0: float | None = None
    tau_tilde0: float | None = None
    zeta: float | None = None
    q: float = 1.0
    zero_penalty: bool = False
    sigma_literal: bool = False
    relax: float = 1.0
    gamma_perp_bar: float = math.inf
    rho_bar: float = math.inf
    lam: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ScheduleError(f"unknown schedule variant {self.variant!r}")
        if self.norm_sq_KP is None:
            object.__setattr__(self, "norm_sq_KP", self.norm_sq_K)
        if self.tau_perp0 is None:
            object.__setattr__(self, "tau_perp0", self.tau0)
        if self.tau_tilde0 is None:
            object.__setattr__(self, "tau_tilde0", self.tau0)
        if self.variant == "alg3" and self.zeta is None:
            object.__setattr__(self, "zeta", self.tau_perp0**-2)
        if self.variant in ("basic", "relaxed", "alg3"):
            # alg3 never uses tau_tilde beyond tau_tilde0 = tau0
            object.__setattr__(self, "tau_tilde0", self.tau0)
        if self.variant in ("basic", "relaxed", "cp_accel"):
            object.__setattr__(self, "tau_perp0", self.tau0)
            object.__setattr__(self, "tau_tilde0", self.tau0)
        validate(self)

    @property
    def effective_gamma(self) -> float:
        """Acceleration factor the schedule actually applies."""
        return 0.0 if self.variant in ("basic", "relaxed") else self.gamma

    @property
    def overrelax_uses_omega_tilde(self) -> bool:
        return self.variant in ALG4

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


def validate(p: ScheduleParams) -> None:
    """Raise :class:`ScheduleError` unless ``p`` is admissible."""
    for name in ("tau0", "tau_perp0", "tau_tilde0", "norm_sq_K"):
        if not getattr(p, name) > 0:
            raise ScheduleError(f"{name} must be positive")
    if p.norm_sq_KP < 0:
        raise ScheduleError("norm_sq_KP must be non-negative")
    if not 0 < p.delta < 1:
        raise ScheduleError("delta must lie in (0, 1)")
    if p.gamma < 0:
        raise ScheduleError("gamma must be non-negative")
    if p.variant == "relaxed" and not 0 < p.relax < 2:
        raise ScheduleError("relaxation parameter must lie in (0, 2)")
    if p.variant == "alg3":
        if not p.zeta > 0:
            raise ScheduleError("zeta must be positive")
        if p.zeta > p.tau_perp0**-2 * (1 + 1e-12):
            raise ScheduleError("zeta must not exceed tau_perp0^-2")
        if p.gamma > 0:
            bound = (p.lam**2 / (2 * p.gamma)) * min(
                p.gamma_perp_bar**2 / p.zeta,
                p.rho_bar**2 * p.zeta * (1 - p.delta) ** 2 / p.norm_sq_K**2,
            )
            if p.tau0 > bound:
                raise ScheduleError(f"tau0 = {p.tau0} violates the feasibility bound {bound}")
    if p.variant in ALG4:
        if p.q < 0:
            raise ScheduleError("q must be non-negative")
        lhs = a_coefficient(0, p) * p.tau_perp0 * p.tau_tilde0**2 * p.norm_sq_K / (2 * (1 - p.delta))
        if lhs > p.rho_bar:
            raise ScheduleError(f"a_0 condition violated: {lhs} > rho_bar = {p.rho_bar}")


def a_coefficient(i: int, p: ScheduleParams) -> float:
    """Dual-penalty sequence ``a_i = tau_tilde0^-2 ((i+1)^q - i^q)``."""
    if p.zero_penalty:
        return 0.0
    lower = float(i) ** p.q if i > 0 else 0.0
    return p.tau_tilde0**-2 * ((i + 1.0) ** p.q - lower)


def sigma_update(omega_decay: float, tau: float, tau_perp: float, p: ScheduleParams) -> float:
    """Dual step ``sigma_{i+1}`` from the primal steps at iteration ``i``."""
    if not (omega_decay > 0 and tau > 0 and tau_perp > 0):
        raise ScheduleError("sigma_update needs positive inputs")
    denom = omega_decay * (max(0.0, tau - tau_perp) * p.norm_sq_KP + tau_perp * p.norm_sq_K)
    if denom <= 0:
        raise ScheduleError("zero denominator in sigma_update")
    return (1.0 - p.delta) / denom


@dataclass(frozen=True)
class StepState:
    """Schedule quantities at iteration ``i``.

    ``tau*`` are the steps used by iteration ``i``. ``sigma`` is
    ``sigma_i``; the factors ``omega*`` and the diagnostics ``gamma_perp``
    (``gamma_perp_{i-1}``) and ``rho`` (``rho_i``) record the transition
    ``i-1 -> i`` and are neutral in the initial state. ``q_tilde`` is
    ``sum_{j<i} 1/tau_tilde_j`` and ``a_sum`` is ``sum_{j<i} a_j``.
    """

    i: int
    tau: float
    tau_perp: float
    tau_tilde: float
    sigma: float
    omega: float = 1.0
    omega_tilde: float = 1.0
    omega_perp: float = 1.0
    gamma_perp: float = 0.0
    rho: float = 0.0
    q_tilde: float = 0.0
    a_sum: float = 0.0


def initial_state(p: ScheduleParams) -> StepState:
    return StepState(
        i=0,
        tau=p.tau0,
        tau_perp=p.tau_perp0,
        tau_tilde=p.tau_tilde0,
        sigma=sigma_update(1.0, p.tau0, p.tau_perp0, p),
    )


def _dual_weight(tau, tau_perp, p):
    return max(0.0, tau - tau_perp) * p.norm_sq_KP + tau_perp * p.norm_sq_K


def _advance(p: ScheduleParams, i, tau, tau_perp, tau_tilde):
    """One schedule transition on plain floats.

    Returns ``(tau', tau_perp', tau_tilde', sigma', omega, omega_tilde,
    omega_perp, gamma_perp, rho', a)``.
    """
    v = p.variant
    a = 0.0
    gamma_perp = 0.0
    rho = 0.0
    if v in ("basic", "relaxed"):
        omega = omega_t = omega_p = 1.0
        sigma = sigma_update(1.0, tau, tau, p)
        return tau, tau, tau, sigma, omega, omega_t, omega_p, gamma_perp, rho, a
    if v == "cp_accel":
        omega = 1.0 / math.sqrt(1.0 + 2.0 * p.gamma * tau)
        tau_n = tau * omega
        sigma = sigma_update(omega, tau, tau, p)
        # with P = I the whole space is accelerated: Gamma_i = gamma I
        return tau_n, tau_n, tau_n, sigma, omega, omega, omega, p.gamma, rho, a
    if v == "alg3":
        omega = 1.0 / math.sqrt(1.0 + 2.0 * p.gamma * tau)
        c = 1.0 / (p.zeta * tau_perp * tau_perp)
        b = (1.0 - c) * omega
        omega_p = 0.5 * (b + math.sqrt(b * b + 4.0 * c))
        tau_n = tau * omega
        tau_perp_n = tau_perp * omega_p
        tau_tilde_n = tau_tilde * omega
        sigma = sigma_update(omega, tau, tau_perp, p)
        gamma_perp = 0.5 * p.zeta * (tau_perp_n / omega - tau_perp)
        rho = p.norm_sq_K * omega * gamma_perp / ((1.0 - p.delta) * p.zeta)
        return tau_n, tau_perp_n, tau_tilde_n, sigma, omega, omega, omega_p, gamma_perp, rho, a
    # alg4 variants
    a = a_coefficient(i, p)
    if v == "alg4_sqrt":
        omega_t = 1.0 / math.sqrt(1.0 + a * tau_tilde * tau_tilde)
    else:
        omega_t = 1.0 / (1.0 + a * tau_tilde * tau_tilde)
    tau_tilde_n = tau_tilde * omega_t
    tau_perp_n = tau_perp / omega_t
    omega = 1.0 / (omega_t * (1.0 + 2.0 * p.gamma * tau))
    tau_n = tau * omega
    sigma = sigma_update(omega if p.sigma_literal else omega_t, tau, tau_perp, p)
    # smallest dual penalty making the sigma-side condition hold
    lhs = (
        _dual_weight(tau, tau_perp, p) / tau_tilde
        - _dual_weight(tau_n, tau_perp_n, p) / tau_tilde_n
    ) / (1.0 - p.delta)
    rho = max(0.0, -0.5 * tau_tilde_n * lhs)
    return tau_n, tau_perp_n, tau_tilde_n, sigma, omega, omega_t, 1.0 / omega_t, gamma_perp, rho, a


def step(state: StepState, p: ScheduleParams) -> StepState:
    """Advance the schedule from iteration ``i`` to ``i + 1``."""
    tau, tau_perp, tau_tilde, sigma, om, om_t, om_p, g_perp, rho, a = _advance(
        p, state.i, state.tau, state.tau_perp, state.tau_tilde
    )
    return StepState(
        i=state.i + 1,
        tau=tau,
        tau_perp=tau_perp,
        tau_tilde=tau_tilde,
        sigma=sigma,
        omega=om,
        omega_tilde=om_t,
        omega_perp=om_p,
        gamma_perp=g_perp,
        rho=rho,
        q_tilde=state.q_tilde + 1.0 / state.tau_tilde,
        a_sum=state.a_sum + a,
    )


# step_cp_accel / step_alg3 / step_alg4 are thin aliases kept for readability
def step_cp_accel(state: StepState, p: ScheduleParams) -> StepState:
    if p.variant != "cp_accel":
        raise ScheduleError("parameters are not for the cp_accel schedule")
    return step(state, p)


def step_alg3(state: StepState, p: ScheduleParams) -> StepState:
    if p.variant != "alg3":
        raise ScheduleError("parameters are not for the alg3 schedule")
    return step(state, p)


def step_alg4(state: StepState, p: ScheduleParams) -> StepState:
    if p.variant not in ALG4:
        raise ScheduleError("parameters are not for an alg4 schedule")
    return step(state, p)


@dataclass
class ScheduleTrace:
    """Column arrays of a schedule run; row ``k`` is the state at iteration ``k``."""

    params: ScheduleParams
    columns: dict = field(default_factory=dict)

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    def __len__(self):
        return len(self.columns["i"])

    def state(self, k: int) -> StepState:
        return StepState(**{name: (int(col[k]) if name == "i" else float(col[k])) for name, col in self.columns.items()})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for k in range(len(self)):
                w.writerow(
                    [int(self.columns["i"][k])]
                    + [f"{self.columns[c][k]:.12g}" for c in TRACE_COLUMNS[1:]]
                )


def _fast_columns(p: ScheduleParams, n: int, s0: StepState):
    """Inlined loops for cp_accel and alg3, bit-identical to :func:`_advance`."""
    sqrt = math.sqrt
    num = 1.0 - p.delta
    nk, nkp, g = p.norm_sq_K, p.norm_sq_KP, p.gamma
    tau, tp, tt = s0.tau, s0.tau_perp, s0.tau_tilde
    c_tau, c_tp, c_tt, c_sig = [tau] * (n + 1), [tp] * (n + 1), [tt] * (n + 1), [s0.sigma] * (n + 1)
    c_om, c_omp = [1.0] * (n + 1), [1.0] * (n + 1)
    c_gp, c_rho, c_q = [0.0] * (n + 1), [0.0] * (n + 1), [0.0] * (n + 1)
    q = 0.0
    if p.variant == "cp_accel":
        for j in range(1, n + 1):
            q += 1.0 / tau
            w = 1.0 / sqrt(1.0 + 2.0 * g * tau)
            c_sig[j] = num / (w * (0.0 * nkp + tau * nk))
            tau = tau * w
            c_tau[j] = c_tp[j] = c_tt[j] = tau
            c_om[j] = w
            c_q[j] = q
        c_omp = c_om
        c_gp = [g] * (n + 1)
        c_gp[0] = 0.0
    else:
        zeta = p.zeta
        kz = nk / (num * zeta)
        for j in range(1, n + 1):
            q += 1.0 / tt
            w = 1.0 / sqrt(1.0 + 2.0 * g * tau)
            c = 1.0 / (zeta * tp * tp)
            b = (1.0 - c) * w
            wp = 0.5 * (b + sqrt(b * b + 4.0 * c))
            c_sig[j] = num / (w * (max(0.0, tau - tp) * nkp + tp * nk))
            tp_n = tp * wp
            gp = 0.5 * zeta * (tp_n / w - tp)
            c_gp[j] = gp
            c_rho[j] = nk * w * gp / (num * zeta)
            tau = tau * w
            tp = tp_n
            tt = tt * w
            c_tau[j], c_tp[j], c_tt[j] = tau, tp, tt
            c_om[j], c_omp[j] = w, wp
            c_q[j] = q
    return {
        "tau": c_tau,
        "tau_perp": c_tp,
        "tau_tilde": c_tt,
        "sigma": c_sig,
        "omega": c_om,
        "omega_tilde": c_om,
        "omega_perp": c_omp,
        "gamma_perp": c_gp,
        "rho": c_rho,
        "q_tilde": c_q,
        "a_sum": [0.0] * (n + 1),
    }


def trace(p: ScheduleParams, n: int) -> ScheduleTrace:
    """Run the schedule for ``n`` transitions and collect ``n + 1`` states."""
    if n < 0:
        raise ValueError("n must be non-negative")
    s0 = initial_state(p)
    if p.variant in ("cp_accel", "alg3"):
        out = {name: np.asarray(col, dtype=float) for name, col in _fast_columns(p, n, s0).items()}
        out["i"] = np.arange(n + 1)
        return ScheduleTrace(p, out)
    cols = {name: [0.0] * (n + 1) for name in (*TRACE_COLUMNS, "q_tilde", "a_sum")}
    tau, tau_perp, tau_tilde = s0.tau, s0.tau_perp, s0.tau_tilde
    q_tilde = a_sum = 0.0
    c_tau, c_tp, c_tt, c_sig = cols["tau"], cols["tau_perp"], cols["tau_tilde"], cols["sigma"]
    c_om, c_omt, c_omp = cols["omega"], cols["omega_tilde"], cols["omega_perp"]
    c_gp, c_rho, c_q, c_a = cols["gamma_perp"], cols["rho"], cols["q_tilde"], cols["a_sum"]
    c_tau[0], c_tp[0], c_tt[0], c_sig[0] = tau, tau_perp, tau_tilde, s0.sigma
    c_om[0] = c_omt[0] = c_omp[0] = 1.0
    adv = _advance
    for k in range(n):
        q_tilde += 1.0 / tau_tilde
        tau, tau_perp, tau_tilde, sig, om, omt, omp, gp, rho, a = adv(p, k, tau, tau_perp, tau_tilde)
        a_sum += a
        j = k + 1
        c_tau[j], c_tp[j], c_tt[j], c_sig[j] = tau, tau_perp, tau_tilde, sig
        c_om[j], c_omt[j], c_omp[j], c_gp[j], c_rho[j] = om, omt, omp, gp, rho
        c_q[j], c_a[j] = q_tilde, a_sum
    out = {name: np.asarray(col, dtype=float) for name, col in cols.items()}
    out["i"] = np.arange(n + 1)
    return ScheduleTrace(p, out)


def tau_sequence(p: ScheduleParams, n: int) -> np.ndarray:
    """Only the primal steps ``tau_0 .. tau_n``; same values as :func:`trace`.

    For cp_accel and alg3 ``tau`` obeys an autonomous recurrence, so it can be
    generated without the remaining columns. This is the cheap path for long
    runs such as checking the ``O(1/N)`` step bounds over a million steps.
    """
    if p.variant not in ("cp_accel", "alg3"):
        return trace(p, n)["tau"]
    sqrt = math.sqrt
    g2 = 2.0 * p.gamma
    tau = p.tau0
    out = [tau] * (n + 1)
    for j in range(1, n + 1):
        tau = tau * (1.0 / sqrt(1.0 + g2 * tau))
        out[j] = tau
    return np.asarray(out)


def default_params(
    variant: str,
    norm_sq_K: float,
    norm_sq_KP: float | None = None,
    gamma: float = 0.5,
    delta: float = 0.01,
    sigma0: float | None = None,
    **overrides,
) -> ScheduleParams:
    """Parameters used in the reference experiments.

    ``sigma0 = 1.9/|K|`` and ``tau* = (1 - delta)/(sigma0 |K|^2)`` for the
    fixed-step methods; the partially accelerated schedules start from
    ``tau0 = tau_tilde0 = 80 tau*`` and ``tau_perp0 = 3 tau*`` with
    ``zeta = tau_perp0^-2`` and ``q = 1``.
    """
    if sigma0 is None:
        sigma0 = 1.9 / math.sqrt(norm_sq_K)
    tau_star = (1.0 - delta) / (sigma0 * norm_sq_K)
    kw = dict(variant=variant, delta=delta, gamma=gamma, norm_sq_K=norm_sq_K, norm_sq_KP=norm_sq_KP)
    if variant in ("basic", "relaxed", "cp_accel"):
        kw.update(tau0=tau_star)
        if variant == "relaxed":
            kw.update(relax=1.5)
    elif variant == "alg3":
        kw.update(tau0=80 * tau_star, tau_perp0=3 * tau_star)
    else:
        kw.update(tau0=80 * tau_star, tau_tilde0=80 * tau_star, tau_perp0=3 * tau_star, q=1.0)
    kw.update(overrides)
    return ScheduleParams(**kw)


# --- ledger -----------------------------------------------------------------


@dataclass
class LedgerFailure:
    condition: str
    index: int
    lhs: float
    rhs: float

    def __str__(self):
        return f"condition {self.condition} fails at i={self.index}: {self.lhs:.12g} < {self.rhs:.12g}"


@dataclass
class LedgerReport:
    variant: str
    steps: int
    failures: list = field(default_factory=list)
    telescoping_error: float | None = None
    equality_error: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        head = f"{self.variant}: {self.steps} steps, " + ("PASS" if self.ok else f"FAIL ({len(self.failures)} violations)")
        extra = []
        if self.telescoping_error is not None:
            extra.append(f"telescoping rel. error {self.telescoping_error:.2e}")
        lines = [head + (" - " + ", ".join(extra) if extra else "")]
        lines += [f"  {f}" for f in self.failures[:10]]
        return "\n".join(lines)


def _violations(name, lhs, rhs, tol, offset=0):
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-300)
    bad = np.nonzero(lhs < rhs - tol * scale)[0]
    return [LedgerFailure(name, int(k) + offset, float(lhs[k]), float(rhs[k])) for k in bad]


def check_conditions(tr: ScheduleTrace, p: ScheduleParams | None = None, tol: float = 1e-9) -> LedgerReport:
    """Verify the scalar step conditions along a trace.

    (i)   (1 + 2 gamma tau_i) / (tau~_i tau_i) >= 1 / (tau~_{i+1} tau_{i+1})
    (ii)  1/(tau~_i tau_perp_i) - 1/(tau~_{i+1} tau_perp_{i+1}) >= -2 gamma_perp_i / tau~_i
    (iii) (1/sigma_{i+1} + 2 rho_{i+1}) / tau~_{i+1} >= 1 / (tau~_{i+2} sigma_{i+2})
    (iv)  1/sigma_{i+1} >= omega~_i / (1 - delta) (max(0, tau_i - tau_perp_i)|KP|^2 + tau_perp_i |K|^2)

    plus positivity, ``tau~_i <= tau~_0``, and, when (i) holds with equality,
    the identity ``1/(tau~_N tau_N) = 1/(tau~_0 tau_0) + 2 gamma sum_{j<N} 1/tau~_j``.
    """
    p = tr.params if p is None else p
    n = len(tr)
    if n < 2:
        raise ValueError("trace needs at least two states")
    g = p.effective_gamma
    tau, tp, tt = tr["tau"], tr["tau_perp"], tr["tau_tilde"]
    sig, rho, gp, omt = tr["sigma"], tr["rho"], tr["gamma_perp"], tr["omega_tilde"]
    rep = LedgerReport(p.variant, n - 1)

    for name in ("tau", "tau_perp", "tau_tilde", "sigma"):
        bad = np.nonzero(~(tr[name] > 0))[0]
        rep.failures += [LedgerFailure(f"{name}>0", int(k), float(tr[name][k]), 0.0) for k in bad]
    rep.failures += _violations("tau_tilde<=tau_tilde0", np.full(n, tt[0]), tt, tol)

    lhs1 = (1.0 + 2.0 * g * tau[:-1]) / (tt[:-1] * tau[:-1])
    rhs1 = 1.0 / (tt[1:] * tau[1:])
    rep.failures += _violations("(i)", lhs1, rhs1, tol)
    rep.equality_error = float(np.max(np.abs(lhs1 - rhs1) / rhs1))

    lhs2 = 1.0 / (tt[:-1] * tp[:-1]) - 1.0 / (tt[1:] * tp[1:])
    rhs2 = -2.0 * gp[1:] / tt[:-1]
    scale2 = np.maximum(1.0 / (tt[:-1] * tp[:-1]), 1.0 / (tt[1:] * tp[1:]))
    bad = np.nonzero(lhs2 < rhs2 - tol * scale2)[0]
    rep.failures += [LedgerFailure("(ii)", int(k), float(lhs2[k]), float(rhs2[k])) for k in bad]

    if n >= 3:
        lhs3 = (1.0 / sig[1:-1] + 2.0 * rho[1:-1]) / tt[1:-1]
        rhs3 = 1.0 / (tt[2:] * sig[2:])
        rep.failures += _violations("(iii)", lhs3, rhs3, tol)

    weight = np.maximum(0.0, tau[:-1] - tp[:-1]) * p.norm_sq_KP + tp[:-1] * p.norm_sq_K
    lhs4 = 1.0 / sig[1:]
    rhs4 = omt[1:] * weight / (1.0 - p.delta)
    rep.failures += _violations("(iv)", lhs4, rhs4, tol)

    if rep.equality_error <= tol:
        q = tr["q_tilde"]
        lhs = 1.0 / (tt * tau)
        rhs = 1.0 / (tt[0] * tau[0]) + 2.0 * g * q
        rep.telescoping_error = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    rep.failures.sort(key=lambda f: f.index)
    return rep


def tau_bound_violations(tr: ScheduleTrace, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices ``N >= 1`` where ``tau_N <= (1/gamma + tau0)/N`` or
    ``1/tau_N <= 1/tau0 + gamma N`` fails."""
    tau = tr["tau"]
    N = np.arange(len(tau), dtype=float)
    t0 = tau[0]
    first = np.nonzero(tau[1:] > (1.0 / gamma + t0) / N[1:])[0] + 1
    second = np.nonzero(1.0 / tau[1:] > 1.0 / t0 + gamma * N[1:])[0] + 1
    return first, second


def corrupt(tr: ScheduleTrace, index: int, factor: float = 1.01) -> ScheduleTrace:
    """Copy of ``tr`` with ``tau`` at ``index`` scaled; a ledger negative control."""
    cols = {k: v.copy() for k, v in tr.columns.items()}
    cols["tau"][index] *= factor
    return ScheduleTrace(tr.params, cols)


def with_variant(p: ScheduleParams, variant: str, **changes) -> ScheduleParams:
    return replace(p, variant=variant, **changes)
