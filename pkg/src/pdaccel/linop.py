"""Linear operators with adjoints and norm bounds, and orthogonal projectors.

Forward differences use Neumann boundary handling: the difference across the
last row/column is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import StackedVar, conj_reflect, fft2, ifft2, inner, is_conjugate_symmetric, sym_inner

# norm bounds for the forward-difference operators with unit cell width
GRAD_NORM_SQ = 8.0
TGV2_NORM_SQ = 11.4


@dataclass(frozen=True)
class LinOp:
    """A bounded linear map ``K`` together with ``K*`` and a bound on ``|K|^2``.

    ``dom_shape``/``cod_shape`` are array shapes, or tuples of shapes for
    stacked variables. ``cod_inner`` is the inner product of the codomain, used
    wherever ``<Kx, y>`` has to be evaluated.
    """

    apply: Callable
    adjoint: Callable
    norm_sq_bound: float
    dom_shape: tuple
    cod_shape: tuple
    name: str = "linop"
    cod_inner: Callable = field(default=inner, repr=False)

    def __call__(self, x):
        return self.apply(x)

    def random_domain(self, rng: np.random.Generator):
        return _random_element(self.dom_shape, rng)

    def random_codomain(self, rng: np.random.Generator):
        return _random_element(self.cod_shape, rng)


def _is_stacked_shape(shape) -> bool:
    return len(shape) > 0 and isinstance(shape[0], tuple)


def _random_element(shape, rng):
    if _is_stacked_shape(shape):
        return StackedVar(*(rng.standard_normal(s) for s in shape))
    return rng.standard_normal(shape)


def zeros(shape):
    if _is_stacked_shape(shape):
        return StackedVar(*(np.zeros(s) for s in shape))
    return np.zeros(shape)


@dataclass(frozen=True)
class Projector:
    """Orthogonal (idempotent, self-adjoint) projector ``P``.

    ``kind`` is one of ``identity``, ``fourier_mask``, ``pixel_mask``,
    ``block`` or ``rowspace``; ``data`` holds the mask, kept-block tuple or
    orthonormal basis accordingly.
    """

    apply: Callable
    kind: str
    data: object = None

    def __call__(self, x):
        return self.apply(x)

    def perp(self, x):
        """Complementary projection ``(I - P) x``."""
        return x - self.apply(x)

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"


# --- finite differences -----------------------------------------------------


def _diff(x: np.ndarray, axis: int) -> np.ndarray:
    d = np.zeros_like(x)
    if axis == 0:
        d[:-1] = x[1:] - x[:-1]
    else:
        d[:, :-1] = x[:, 1:] - x[:, :-1]
    return d


def _diff_adj(p: np.ndarray, axis: int) -> np.ndarray:
    out = np.zeros_like(p)
    if axis == 0:
        out[:-1] -= p[:-1]
        out[1:] += p[:-1]
    else:
        out[:, :-1] -= p[:, :-1]
        out[:, 1:] += p[:, :-1]
    return out


def grad_apply(x: np.ndarray) -> np.ndarray:
    return np.stack([_diff(x, 0), _diff(x, 1)])


def grad_adjoint(y: np.ndarray) -> np.ndarray:
    """``grad^* y``, i.e. the negative discrete divergence."""
    return _diff_adj(y[0], 0) + _diff_adj(y[1], 1)


def symgrad_apply(w: np.ndarray) -> np.ndarray:
    return np.stack(
        [_diff(w[0], 0), _diff(w[1], 1), 0.5 * (_diff(w[0], 1) + _diff(w[1], 0))]
    )


def symgrad_adjoint(t: np.ndarray) -> np.ndarray:
    # adjoint w.r.t. the tensor inner product weighting channel 2 twice
    return np.stack(
        [
            _diff_adj(t[0], 0) + _diff_adj(t[2], 1),
            _diff_adj(t[1], 1) + _diff_adj(t[2], 0),
        ]
    )


def grad(shape: tuple[int, int]) -> LinOp:
    """Forward-difference gradient of a scalar field."""
    shape = tuple(shape)
    return LinOp(grad_apply, grad_adjoint, GRAD_NORM_SQ, shape, (2, *shape), "grad")


def symgrad(shape: tuple[int, int]) -> LinOp:
    """Symmetrised gradient ``(d1 w1, d2 w2, (d2 w1 + d1 w2)/2)`` of a vector field."""
    shape = tuple(shape)
    return LinOp(
        symgrad_apply,
        symgrad_adjoint,
        GRAD_NORM_SQ,
        (2, *shape),
        (3, *shape),
        "symgrad",
        cod_inner=sym_inner,
    )


def _tgv_inner(a: StackedVar, b: StackedVar) -> float:
    return inner(a[0], b[0]) + sym_inner(a[1], b[1])


def tgv2_block(shape: tuple[int, int]) -> LinOp:
    """Block operator ``(u, w) -> (grad u - w, E w)``."""
    shape = tuple(shape)

    def apply(x):
        u, w = x
        if u.shape != shape or w.shape != (2, *shape):
            raise ValueError(f"expected (u, w) with shapes {shape}, (2, *{shape})")
        return StackedVar(grad_apply(u) - w, symgrad_apply(w))

    def adjoint(y):
        y1, y2 = y
        return StackedVar(grad_adjoint(y1), symgrad_adjoint(y2) - y1)

    return LinOp(
        apply,
        adjoint,
        TGV2_NORM_SQ,
        (shape, (2, *shape)),
        ((2, *shape), (3, *shape)),
        "tgv2",
        cod_inner=_tgv_inner,
    )


# --- multipliers, masks, dense ----------------------------------------------


def fourier_diag(a_hat: np.ndarray) -> LinOp:
    """Fourier multiplier ``x -> ifft2(a_hat * fft2(x))`` on real fields."""
    a_hat = np.asarray(a_hat, dtype=complex)
    if not is_conjugate_symmetric(a_hat):
        raise ValueError("multiplier is not conjugate-symmetric; output would be complex")
    a_conj = np.conj(a_hat)
    shape = a_hat.shape
    return LinOp(
        lambda x: ifft2(a_hat * fft2(x)),
        lambda y: ifft2(a_conj * fft2(y)),
        float(np.max(np.abs(a_hat)) ** 2),
        shape,
        shape,
        "fourier_diag",
    )


def subsample(mask: np.ndarray) -> LinOp:
    """Restriction ``S`` of a field to the pixels where ``mask`` is true."""
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("subsampling mask selects no pixels")

    def adjoint(v):
        out = np.zeros(mask.shape)
        out[mask] = v
        return out

    return LinOp(lambda x: x[mask], adjoint, 1.0, mask.shape, (count,), "subsample")


def dense(matrix: np.ndarray) -> LinOp:
    matrix = np.asarray(matrix, dtype=float)
    smax = np.linalg.norm(matrix, 2) if matrix.size else 0.0
    return LinOp(
        lambda x: matrix @ x,
        lambda y: matrix.T @ y,
        float(smax**2) * (1 + 1e-12),
        (matrix.shape[1],),
        (matrix.shape[0],),
        "dense",
    )


def identity(shape) -> LinOp:
    shape = tuple(shape)
    return LinOp(lambda x: x, lambda y: y, 1.0, shape, shape, "identity")


def compose(a: LinOp, b: LinOp, norm_sq_bound: float | None = None) -> LinOp:
    """``a @ b``; the norm bound defaults to the product of the bounds."""
    bound = a.norm_sq_bound * b.norm_sq_bound if norm_sq_bound is None else norm_sq_bound
    return LinOp(
        lambda x: a.apply(b.apply(x)),
        lambda y: b.adjoint(a.adjoint(y)),
        bound,
        b.dom_shape,
        a.cod_shape,
        f"{a.name}*{b.name}",
        cod_inner=a.cod_inner,
    )


def with_projector(op: LinOp, proj: Projector, norm_sq_bound: float) -> LinOp:
    """``K P`` for a projector ``P`` on the domain of ``K``."""
    return LinOp(
        lambda x: op.apply(proj.apply(x)),
        lambda y: proj.apply(op.adjoint(y)),
        norm_sq_bound,
        op.dom_shape,
        op.cod_shape,
        f"{op.name}*P",
        cod_inner=op.cod_inner,
    )


# --- projectors -------------------------------------------------------------


def identity_projector() -> Projector:
    return Projector(lambda x: x, "identity")


def fourier_mask_projector(a_hat: np.ndarray, rel_threshold: float) -> Projector:
    """Projector onto frequencies where ``|a_hat| >= rel_threshold * max|a_hat|``."""
    if not 0 < rel_threshold <= 1:
        raise ValueError("rel_threshold must lie in (0, 1]")
    mag = np.abs(np.asarray(a_hat))
    amax = float(mag.max()) if mag.size else 0.0
    if amax == 0:
        raise ValueError("multiplier is identically zero")
    mask = mag >= rel_threshold * amax
    # |a_hat| of a conjugate-symmetric multiplier is even; enforce it exactly
    mask = mask & conj_reflect(mask.astype(complex)).real.astype(bool)
    if mask.all():
        return Projector(lambda x: x, "identity", mask)
    p = mask.astype(float)
    return Projector(lambda x: ifft2(p * fft2(x)), "fourier_mask", mask)


def pixel_mask_projector(mask: np.ndarray) -> Projector:
    mask = np.asarray(mask, dtype=bool)
    if mask.all():
        return Projector(lambda x: x, "identity", mask)
    m = mask.astype(float)
    return Projector(lambda x: m * x, "pixel_mask", mask)


def block_projector(keep: tuple[int, ...] = (0,)) -> Projector:
    """Keep the listed parts of a stacked variable and zero the others."""
    keep = tuple(keep)

    def apply(x):
        return StackedVar(*(p if k in keep else np.zeros_like(p) for k, p in enumerate(x)))

    return Projector(apply, "block", keep)


def rowspace_projector(matrix: np.ndarray, rel_tol: float = 1e-10):
    """Projector onto the row space of ``matrix``.

    Returns ``(P, V, s, U)`` with ``V`` the orthonormal row-space basis and
    ``s`` the retained singular values; singular values below
    ``rel_tol * s_max`` count as zero.
    """
    matrix = np.asarray(matrix, dtype=float)
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise ValueError("matrix has rank 0")
    r = int(np.sum(s > rel_tol * s[0]))
    u, s, v = u[:, :r], s[:r], vt[:r].T
    if r == matrix.shape[1]:
        proj = Projector(lambda x: x, "identity", v)
    else:
        proj = Projector(lambda x: v @ (v.T @ x), "rowspace", v)
    return proj, v, s, u


# --- norm estimation --------------------------------------------------------


def power_iteration(op: LinOp, iters: int = 100, seed: int = 0, x0=None) -> float:
    """Estimate ``|op|^2``, the largest eigenvalue of ``op^* op``.

    Returns the Rayleigh quotient after ``iters`` normalised iterations; this
    estimate is non-decreasing in ``iters``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    x = op.random_domain(np.random.default_rng(seed)) if x0 is None else x0
    est = 0.0
    for _ in range(iters):
        nx = np.sqrt(inner(x, x))
        if nx == 0:
            return 0.0
        x = x / nx
        v = op.adjoint(op.apply(x))
        est = max(est, inner(x, v))
        x = v
    return float(est)


def adjoint_mismatch(op: LinOp, rng: np.random.Generator) -> float:
    """Relative adjoint defect ``|<Kx, y> - <x, K*y>| / (|x| |y|)`` at random points."""
    x = op.random_domain(rng)
    y = op.random_codomain(rng)
    lhs = op.cod_inner(op.apply(x), y)
    rhs = inner(x, op.adjoint(y))
    scale = np.sqrt(inner(x, x) * op.cod_inner(y, y))
    return abs(lhs - rhs) / scale
