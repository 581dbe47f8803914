"""Resolvents of the data terms ``G`` and the conjugate regularisers ``F*``.

Step operators on the primal side have the subspace form
``T = tau P + tau_perp P_perp``; the Fourier data term is diagonalised by the
FFT so such a ``T`` can be applied per frequency whenever ``P`` is a Fourier
mask.
"""

from __future__ import annotations

import numpy as np

from .core import SYM_WEIGHTS, conj_reflect, fft2, ifft2, is_conjugate_symmetric, norm


def prox_quad_identity(x, t: float, f):
    """Resolvent of ``t * d(1/2 |f - .|^2)``: ``(x + t f) / (1 + t)``."""
    if t <= 0:
        raise ValueError("step must be positive")
    return (x + t * f) / (1.0 + t)


class FourierQuadProx:
    """Resolvent of ``G(x) = 1/2 |f - A x|^2`` with ``A = F* a_hat F``.

    Solves ``(I + T A*A) x' = x + T A* f`` frequency by frequency, where the
    step ``T`` takes the value ``tau`` on the mask ``p`` and ``tau_perp`` off it.
    """

    def __init__(self, a_hat, f, mask=None):
        a_hat = np.asarray(a_hat, dtype=complex)
        if not is_conjugate_symmetric(a_hat):
            raise ValueError("multiplier is not conjugate-symmetric")
        self.a_hat = a_hat
        self.abs2 = np.abs(a_hat) ** 2
        self.af = np.conj(a_hat) * fft2(np.asarray(f, dtype=float))
        if mask is None:
            mask = np.ones(a_hat.shape, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if not np.array_equal(mask, conj_reflect(mask.astype(complex)).real.astype(bool)):
            raise ValueError("frequency mask is not symmetric")
        self.mask = mask

    def __call__(self, x, tau: float, tau_perp: float | None = None):
        if tau_perp is None:
            tau_perp = tau
        if tau <= 0 or tau_perp <= 0:
            raise ValueError("steps must be positive")
        t = np.where(self.mask, tau, tau_perp)
        return ifft2((fft2(x) + t * self.af) / (1.0 + t * self.abs2))


def prox_quad_fourier(x, tau, tau_perp, mask, a_hat, f_hat):
    """Functional form of :class:`FourierQuadProx` taking the data spectrum."""
    a_hat = np.asarray(a_hat, dtype=complex)
    f_hat = np.asarray(f_hat, dtype=complex)
    mask = np.asarray(mask, dtype=bool)
    if tau <= 0 or tau_perp <= 0:
        raise ValueError("steps must be positive")
    if not (is_conjugate_symmetric(a_hat) and is_conjugate_symmetric(f_hat)):
        raise ValueError("spectra must be conjugate-symmetric")
    if not is_conjugate_symmetric(mask.astype(complex)):
        raise ValueError("frequency mask is not symmetric")
    t = np.where(mask, tau, tau_perp)
    xh = fft2(x)
    return ifft2((xh + t * np.conj(a_hat) * f_hat) / (1.0 + t * np.abs(a_hat) ** 2))


def pointwise_magnitude(y: np.ndarray) -> np.ndarray:
    """Per-pixel Euclidean magnitude over channel axis 0.

    Three-channel fields are symmetric tensors and get the Frobenius weighting.
    """
    y = np.asarray(y)
    if y.ndim >= 1 and y.shape[0] == 3 and y.ndim == 3:
        return np.sqrt(np.tensordot(SYM_WEIGHTS, y * y, axes=1))
    return np.sqrt(np.sum(y * y, axis=0))


def project_linf_ball(y: np.ndarray, alpha: float) -> np.ndarray:
    """Project each pixel of a vector/tensor field onto the ball of radius ``alpha``.

    This is the resolvent of ``sigma * d delta_{|.|_inf <= alpha}`` for every
    ``sigma > 0``.
    """
    if alpha <= 0:
        raise ValueError("radius must be positive")
    mag = pointwise_magnitude(y)
    scale = alpha / np.maximum(mag, alpha)
    return y * scale


def project_l2_ball(w, radius: float):
    """Global rescale onto ``{|w|_2 <= radius}``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = norm(w)
    if n <= radius:
        return w
    return w * (radius / n)


def clamp_interval(y: np.ndarray, alpha: float) -> np.ndarray:
    """Componentwise clamp to ``[-alpha, alpha]`` (dual of the 1-norm)."""
    if alpha <= 0:
        raise ValueError("bound must be positive")
    return np.clip(y, -alpha, alpha)


def soft_threshold(x: np.ndarray, level: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - level, 0.0)
