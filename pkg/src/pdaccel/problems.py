"""Builders for the bundled saddle-point problems.

Each builder returns a :class:`SaddleProblem` of the form

    min_x max_y  G(x) + <K x, y> - F*(y)

with ``F*`` the indicator of a pointwise ball, so ``F*(y) = 0`` on feasible
duals. Besides the resolvents, every problem carries what the pseudo duality
gap needs: the primal value ``G(x) + F(Kx)`` and the conjugate of ``G``
augmented by a ball constraint ``|Q_perp x| <= M``, returned as the affine
function ``base + M * slope`` of ``M``. ``Q_perp`` is the part of the primal
space on which ``G`` gives no control (off the blur support, off the mask,
the ``w`` block of TGV, off the row space of ``A``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import linop
from .core import StackedVar, fft2, gaussian_blur_spectrum, ifft2, inner, norm
from .linop import LinOp, Projector
from .prox import FourierQuadProx, clamp_interval, pointwise_magnitude, project_l2_ball, project_linf_ball

KINDS = ("tv_denoise", "tv_deblur", "tv_inpaint", "tgv2_denoise", "lasso")

# power-iteration estimates of |KP|^2 are lower bounds; inflate slightly
NORM_ESTIMATE_MARGIN = 1.01


@dataclass(frozen=True)
class SaddleProblem:
    kind: str
    K: LinOp
    P: Projector
    prox_g: Callable  # (v, tau, tau_perp) -> x
    prox_fstar: Callable  # (y, sigma) -> y
    norm_sq_K: float
    norm_sq_KP: float
    gamma_bar: float
    f: np.ndarray
    alpha: float
    primal_value: Callable  # x -> G(x) + F(Kx)
    conj_terms: Callable  # z -> (base, slope) with G_M*(z) = base + M slope
    constrained_part: Callable  # x -> Q_perp x
    dual_excess: Callable  # y -> max pointwise violation of the F* ball
    hessian_quad: Callable  # d -> <d, G'' d>
    beta: float | None = None
    info: dict = field(default_factory=dict)

    def step_T(self, v, tau: float, tau_perp: float):
        """``T v`` for ``T = tau P + tau_perp (I - P)``."""
        if self.P.is_identity or tau == tau_perp:
            return tau * v
        return tau_perp * v + (tau - tau_perp) * self.P(v)

    def zeros_primal(self):
        return linop.zeros(self.K.dom_shape)

    def zeros_dual(self):
        return linop.zeros(self.K.cod_shape)

    def constrained_norm(self, x) -> float:
        return norm(self.constrained_part(x))

    @property
    def data_norm(self) -> float:
        return norm(self.f)


def _l1_magnitude(y) -> float:
    return float(np.sum(pointwise_magnitude(y)))


def _ball_excess(y, radius) -> float:
    return float(np.max(pointwise_magnitude(y), initial=0.0) - radius)


def _check_weight(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive")


def _tv_parts(shape, alpha):
    K = linop.grad(shape)
    return (
        K,
        lambda y, sigma: project_linf_ball(y, alpha),
        lambda y: _ball_excess(y, alpha),
    )


def build_tv_denoise(f, alpha: float = 2.55) -> SaddleProblem:
    """TV denoising: ``G = 1/2 |f - x|^2``, ``F = alpha |grad x|_1``, ``P = I``."""
    _check_weight("alpha", alpha)
    f = np.asarray(f, dtype=float)
    K, prox_fstar, excess = _tv_parts(f.shape, alpha)

    def prox_g(v, tau, tau_perp=None):
        return (v + tau * f) / (1.0 + tau)

    def value(x):
        return 0.5 * float(np.sum((f - x) ** 2)) + alpha * _l1_magnitude(K(x))

    def conj(z):
        return 0.5 * inner(z, z) + inner(z, f), 0.0

    return SaddleProblem(
        kind="tv_denoise",
        K=K,
        P=linop.identity_projector(),
        prox_g=prox_g,
        prox_fstar=prox_fstar,
        norm_sq_K=K.norm_sq_bound,
        norm_sq_KP=K.norm_sq_bound,
        gamma_bar=1.0,
        f=f,
        alpha=alpha,
        primal_value=value,
        conj_terms=conj,
        constrained_part=lambda x: np.zeros_like(x),
        dual_excess=excess,
        hessian_quad=lambda d: inner(d, d),
    )


def build_tv_deblur(
    f,
    width: float = 4.0,
    alpha: float = 2.55 * 0.15,
    projector_rel: float = 0.3,
    zero_rel: float = 1e-3,
    norm_iters: int = 200,
) -> SaddleProblem:
    """TV deblurring with a periodic Gaussian blur ``A = F* a_hat F``.

    The solver works with the exact multiplier ``a_hat``. The gap evaluator
    uses ``a_gap``, equal to ``a_hat`` except that entries below
    ``zero_rel * max|a_hat|`` are zeroed, and constrains the primal variable
    on those frequencies by ``M``. ``P`` keeps frequencies with
    ``|a_hat| >= projector_rel * max|a_hat|``.
    """
    _check_weight("alpha", alpha)
    if not (0 < projector_rel < 1 and 0 < zero_rel < 1):
        raise ValueError("thresholds must lie in (0, 1)")
    f = np.asarray(f, dtype=float)
    a_hat = gaussian_blur_spectrum(f.shape, width)
    amax = float(np.max(np.abs(a_hat)))
    P = linop.fourier_mask_projector(a_hat, projector_rel)
    mask = P.data
    if not mask.any():
        raise ValueError("projector mask is empty")
    gamma_bar = float(np.min(np.abs(a_hat[mask]) ** 2))

    support = np.abs(a_hat) >= zero_rel * amax
    a_gap = np.where(support, a_hat, 0.0)
    f_hat = fft2(f)
    f_off_sq = float(np.sum(np.abs(f_hat[~support]) ** 2))

    K = linop.grad(f.shape)
    if P.is_identity:
        norm_sq_KP = K.norm_sq_bound
    else:
        est = linop.power_iteration(linop.with_projector(K, P, K.norm_sq_bound), iters=norm_iters)
        norm_sq_KP = min(K.norm_sq_bound, est * NORM_ESTIMATE_MARGIN)
    prox = FourierQuadProx(a_hat, f, mask)
    _, prox_fstar, excess = _tv_parts(f.shape, alpha)

    def value(x):
        r = f - ifft2(a_gap * fft2(x))
        return 0.5 * float(np.sum(r * r)) + alpha * _l1_magnitude(K(x))

    def conj(z):
        zh = fft2(z)
        zs, fs, a = zh[support], f_hat[support], a_gap[support]
        base = 0.5 * float(np.sum(np.abs(zs / a) ** 2))
        base += float(np.sum((np.conj(zs) * fs / a).real))
        base -= 0.5 * f_off_sq
        slope = float(np.sqrt(np.sum(np.abs(zh[~support]) ** 2)))
        return base, slope

    off = (~support).astype(float)

    def off_part(x):
        if support.all():
            return np.zeros_like(x)
        return ifft2(off * fft2(x))

    abs2 = np.abs(a_hat) ** 2
    return SaddleProblem(
        kind="tv_deblur",
        K=K,
        P=P,
        prox_g=prox,
        prox_fstar=prox_fstar,
        norm_sq_K=K.norm_sq_bound,
        norm_sq_KP=norm_sq_KP,
        gamma_bar=gamma_bar,
        f=f,
        alpha=alpha,
        primal_value=value,
        conj_terms=conj,
        constrained_part=off_part,
        dual_excess=excess,
        hessian_quad=lambda d: float(np.sum(abs2 * np.abs(fft2(d)) ** 2)),
        info={"a_hat": a_hat, "a_gap": a_gap, "support": support, "width": width},
    )


def build_tv_inpaint(f_observed, mask, alpha: float = 2.55) -> SaddleProblem:
    """TV inpainting: ``G = 1/2 |S(f - x)|^2`` with ``S`` the pixel restriction."""
    _check_weight("alpha", alpha)
    f = np.asarray(f_observed, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != f.shape:
        raise ValueError("mask and data shapes differ")
    if not mask.any():
        raise ValueError("mask selects no pixels")
    K, prox_fstar, excess = _tv_parts(f.shape, alpha)
    P = linop.pixel_mask_projector(mask)
    if P.is_identity:
        norm_sq_KP = K.norm_sq_bound
    else:
        est = linop.power_iteration(linop.with_projector(K, P, K.norm_sq_bound), iters=200)
        norm_sq_KP = min(K.norm_sq_bound, est * NORM_ESTIMATE_MARGIN)
    m = mask.astype(float)

    def prox_g(v, tau, tau_perp=None):
        return np.where(mask, (v + tau * f) / (1.0 + tau), v)

    def value(x):
        r = m * (f - x)
        return 0.5 * float(np.sum(r * r)) + alpha * _l1_magnitude(K(x))

    def conj(z):
        zm = z[mask]
        return 0.5 * float(zm @ zm) + float(zm @ f[mask]), float(np.linalg.norm(z[~mask]))

    return SaddleProblem(
        kind="tv_inpaint",
        K=K,
        P=P,
        prox_g=prox_g,
        prox_fstar=prox_fstar,
        norm_sq_K=K.norm_sq_bound,
        norm_sq_KP=norm_sq_KP,
        gamma_bar=1.0,
        f=f,
        alpha=alpha,
        primal_value=value,
        conj_terms=conj,
        constrained_part=lambda x: np.where(mask, 0.0, x),
        dual_excess=excess,
        hessian_quad=lambda d: float(np.sum(m * d * d)),
        info={"mask": mask},
    )


def build_tgv2_denoise(f, alpha: float = 4.0, beta: float = 4.4) -> SaddleProblem:
    """Second-order TGV denoising on ``x = (u, w)``.

    ``K(u, w) = (grad u - w, E w)``, with ``|y1| <= alpha`` and
    ``|y2| <= beta`` pointwise on the dual side.
    """
    _check_weight("alpha", alpha)
    _check_weight("beta", beta)
    f = np.asarray(f, dtype=float)
    K = linop.tgv2_block(f.shape)

    def prox_g(v, tau, tau_perp=None):
        u, w = v
        return StackedVar((u + tau * f) / (1.0 + tau), w)

    def prox_fstar(y, sigma):
        return StackedVar(project_linf_ball(y[0], alpha), project_linf_ball(y[1], beta))

    def value(x):
        u, w = x
        y1, y2 = K(x)
        return 0.5 * float(np.sum((f - u) ** 2)) + alpha * _l1_magnitude(y1) + beta * _l1_magnitude(y2)

    def conj(z):
        zu, zw = z
        return 0.5 * inner(zu, zu) + inner(zu, f), norm(zw)

    def excess(y):
        return max(_ball_excess(y[0], alpha), _ball_excess(y[1], beta))

    return SaddleProblem(
        kind="tgv2_denoise",
        K=K,
        P=linop.block_projector((0,)),
        prox_g=prox_g,
        prox_fstar=prox_fstar,
        norm_sq_K=linop.TGV2_NORM_SQ,
        norm_sq_KP=linop.GRAD_NORM_SQ,
        gamma_bar=1.0,
        f=f,
        alpha=alpha,
        beta=beta,
        primal_value=value,
        conj_terms=conj,
        constrained_part=lambda x: StackedVar(np.zeros_like(x[0]), x[1]),
        dual_excess=excess,
        hessian_quad=lambda d: inner(d[0], d[0]),
    )


def build_lasso(A, f, alpha: float, rel_tol: float = 1e-10) -> SaddleProblem:
    """Lasso ``min 1/2 |f - A x|^2 + alpha |x|_1`` with ``K = I``.

    ``P`` projects onto the row space of ``A``; ``gamma_bar`` is the square of
    the smallest retained singular value.
    """
    _check_weight("alpha", alpha)
    A = np.asarray(A, dtype=float)
    f = np.asarray(f, dtype=float)
    if A.ndim != 2 or f.shape != (A.shape[0],):
        raise ValueError("A must be m x n and f of length m")
    if not np.any(A):
        raise ValueError("design matrix is zero")
    P, V, s, U = linop.rowspace_projector(A, rel_tol)
    Utf = U.T @ f
    f_res_sq = float(f @ f - Utf @ Utf)
    K = linop.identity((A.shape[1],))

    def prox_g(v, tau, tau_perp=None):
        c = V.T @ v
        return v - V @ c + V @ ((c + tau * s * Utf) / (1.0 + tau * s * s))

    def value(x):
        r = f - A @ x
        return 0.5 * float(r @ r) + alpha * float(np.sum(np.abs(x)))

    def conj(z):
        c = V.T @ z
        d = c / s
        base = 0.5 * float(d @ d) + float(d @ Utf) - 0.5 * f_res_sq
        return base, float(np.linalg.norm(z - V @ c))

    return SaddleProblem(
        kind="lasso",
        K=K,
        P=P,
        prox_g=prox_g,
        prox_fstar=lambda y, sigma: clamp_interval(y, alpha),
        norm_sq_K=1.0,
        norm_sq_KP=1.0,
        gamma_bar=float(s[-1] ** 2),
        f=f,
        alpha=alpha,
        primal_value=value,
        conj_terms=conj,
        constrained_part=lambda x: x - V @ (V.T @ x),
        dual_excess=lambda y: float(np.max(np.abs(y)) - alpha),
        hessian_quad=lambda d: float(np.sum((A @ d) ** 2)),
        info={"A": A, "V": V, "s": s, "U": U},
    )


def enforce_bound(problem: SaddleProblem, M: float) -> SaddleProblem:
    """Copy of ``problem`` whose primal resolvent also enforces ``|Q_perp x| <= M``.

    ``G`` does not act on ``range(Q_perp)``, so the constrained resolvent is
    the unconstrained one followed by a ball projection of that part. For
    deblurring this holds only up to the blur entries below ``zero_rel``.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    inner_prox = problem.prox_g

    def prox_g(v, tau, tau_perp=None):
        x = inner_prox(v, tau, tau_perp)
        c = problem.constrained_part(x)
        return x - c + project_l2_ball(c, M)

    return replace(problem, prox_g=prox_g, info={**problem.info, "enforced_M": M})


def certify_gamma(problem: SaddleProblem, rng: np.random.Generator, trials: int = 20) -> float:
    """Smallest observed ``<Pd, G'' Pd> / |Pd|^2`` over random directions.

    Should never fall below ``gamma_bar`` (up to rounding).
    """
    worst = math.inf
    for _ in range(trials):
        d = problem.P(problem.K.random_domain(rng))
        nd = inner(d, d)
        if nd > 0:
            worst = min(worst, problem.hessian_quad(d) / nd)
    return worst


DEFAULT_WEIGHTS = {
    "tv_denoise": (2.55, None),
    "tv_deblur": (2.55 * 0.15, None),
    "tv_inpaint": (2.55, None),
    "tgv2_denoise": (4.0, 4.4),
    "lasso": (1.0, None),
}


@dataclass(frozen=True)
class ProblemSpec:
    """Problem kind plus its weights and operator settings (data excluded)."""

    kind: str = "tv_denoise"
    alpha: float | None = None
    beta: float | None = None
    width: float = 4.0
    projector_rel: float = 0.3
    zero_rel: float = 1e-3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        a, b = DEFAULT_WEIGHTS[self.kind]
        if self.alpha is None:
            object.__setattr__(self, "alpha", a)
        if self.beta is None:
            object.__setattr__(self, "beta", b)
        _check_weight("alpha", self.alpha)
        if self.beta is not None:
            _check_weight("beta", self.beta)
        if not (0 < self.projector_rel < 1 and 0 < self.zero_rel < 1):
            raise ValueError("thresholds must lie in (0, 1)")

    def build(self, f, mask=None, A=None) -> SaddleProblem:
        if self.kind == "tv_denoise":
            return build_tv_denoise(f, self.alpha)
        if self.kind == "tv_deblur":
            return build_tv_deblur(f, self.width, self.alpha, self.projector_rel, self.zero_rel)
        if self.kind == "tv_inpaint":
            if mask is None:
                raise ValueError("inpainting needs a mask")
            return build_tv_inpaint(f, mask, self.alpha)
        if self.kind == "tgv2_denoise":
            return build_tgv2_denoise(f, self.alpha, self.beta)
        if A is None:
            raise ValueError("lasso needs a design matrix")
        return build_lasso(A, f, self.alpha)
