"""Grid fields, stacked product-space variables, unitary FFTs and synthetic data.

Fields are plain numpy arrays. A scalar field has shape ``(rows, cols)``; a
vector field ``(2, rows, cols)``; a symmetric 2x2 tensor field
``(3, rows, cols)`` holding ``(xx, yy, xy)`` with the off-diagonal stored once.
Tensor inner products count the off-diagonal channel twice, see
:data:`SYM_WEIGHTS`.
"""

from __future__ import annotations

import numpy as np

#: channel weights of the symmetric-tensor (Frobenius) inner product
SYM_WEIGHTS = np.array([1.0, 1.0, 2.0])


class StackedVar:
    """An ordered tuple of fields living in a product space.

    Supports the vector-space operations needed by the solvers, so that
    iterations can be written identically for plain arrays and for stacked
    variables such as ``(u, w)``.
    """

    __slots__ = ("parts",)
    __array_priority__ = 1000  # keep ``ndarray * StackedVar`` from broadcasting

    def __init__(self, *parts):
        self.parts = tuple(parts)

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __getitem__(self, k):
        return self.parts[k]

    def _zip(self, other, fn):
        if isinstance(other, StackedVar):
            if len(other) != len(self):
                raise ValueError("stacked variables have different part counts")
            return StackedVar(*(fn(a, b) for a, b in zip(self.parts, other.parts)))
        return StackedVar(*(fn(a, other) for a in self.parts))

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._zip(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._zip(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._zip(other, lambda a, b: a / b)

    def __neg__(self):
        return StackedVar(*(-a for a in self.parts))

    def copy(self):
        return StackedVar(*(np.array(a, copy=True) for a in self.parts))

    @property
    def shapes(self):
        return tuple(a.shape for a in self.parts)

    def __repr__(self):
        return f"StackedVar(shapes={self.shapes})"


def inner(a, b) -> float:
    """Euclidean inner product; sums over parts for stacked variables."""
    if isinstance(a, StackedVar):
        return float(sum(inner(p, q) for p, q in zip(a.parts, b.parts)))
    return float(np.vdot(np.asarray(a).ravel(), np.asarray(b).ravel()).real)


def norm(a) -> float:
    return float(np.sqrt(max(inner(a, a), 0.0)))


def sym_inner(a, b) -> float:
    """Inner product of symmetric tensor fields ``(3, rows, cols)``."""
    return float(sum(w * np.vdot(a[k], b[k]) for k, w in enumerate(SYM_WEIGHTS)))


def zeros_like(a):
    if isinstance(a, StackedVar):
        return StackedVar(*(np.zeros_like(p) for p in a.parts))
    return np.zeros_like(a)


def copy(a):
    if isinstance(a, StackedVar):
        return a.copy()
    return np.array(a, copy=True)


def all_finite(a) -> bool:
    if isinstance(a, StackedVar):
        return all(all_finite(p) for p in a.parts)
    return bool(np.all(np.isfinite(a)))


def flatten(a) -> np.ndarray:
    """Concatenate all parts into one flat vector."""
    if isinstance(a, StackedVar):
        return np.concatenate([np.ravel(p) for p in a.parts])
    return np.ravel(a)


# --- spectral transform -----------------------------------------------------


def fft2(x: np.ndarray) -> np.ndarray:
    """Unitary 2D DFT of a real scalar field."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"fft2 expects a scalar (rows, cols) field, got shape {x.shape}")
    if np.iscomplexobj(x):
        raise ValueError("fft2 expects a real field")
    return np.fft.fft2(x, norm="ortho")


def ifft2(xhat: np.ndarray, real: bool = True) -> np.ndarray:
    """Inverse of :func:`fft2`; returns the real part unless ``real=False``."""
    out = np.fft.ifft2(xhat, norm="ortho")
    return out.real if real else out


def conj_reflect(spec: np.ndarray) -> np.ndarray:
    """Return ``conj(F(-xi))`` under periodic index wrap-around."""
    return np.conj(np.roll(spec[::-1, ::-1], 1, axis=(0, 1)))


def is_conjugate_symmetric(spec: np.ndarray, tol: float = 1e-10) -> bool:
    """Check ``F(-xi) == conj(F(xi))`` by a direct scan of all frequencies."""
    spec = np.asarray(spec)
    if not np.iscomplexobj(spec):
        spec = spec.astype(complex)
    scale = max(1.0, float(np.max(np.abs(spec)))) if spec.size else 1.0
    return bool(np.max(np.abs(spec - conj_reflect(spec))) <= tol * scale)


# --- synthetic data ---------------------------------------------------------


def gaussian_noise(field: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise of standard deviation ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    field = np.asarray(field, dtype=float)
    if sigma == 0:
        return field.copy()
    rng = np.random.default_rng(seed)
    return field + sigma * rng.standard_normal(field.shape)


def gaussian_kernel(shape: tuple[int, int], width: float) -> np.ndarray:
    """Periodically wrapped unit-sum Gaussian with standard deviation ``width``.

    The kernel is centred at pixel (0, 0), so convolving with it does not shift
    the image.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    rows, cols = shape
    di = np.minimum(np.arange(rows), rows - np.arange(rows)).astype(float)
    dj = np.minimum(np.arange(cols), cols - np.arange(cols)).astype(float)
    d2 = di[:, None] ** 2 + dj[None, :] ** 2
    k = np.exp(-(d2 - d2.min()) / (2.0 * width**2))
    return k / k.sum()


def gaussian_blur_spectrum(shape: tuple[int, int], width: float) -> np.ndarray:
    """Multiplier ``a_hat`` with ``A = ifft2(a_hat * fft2(x))`` the periodic blur.

    Because the transforms are unitary, ``a_hat`` is the *unnormalised* DFT of
    the kernel, so ``a_hat[0, 0] == 1`` for the unit-mass kernel.
    """
    k = gaussian_kernel(shape, width)
    return np.fft.fft2(k)


def phantom(n: int = 64, cols: int | None = None) -> np.ndarray:
    """Piecewise-affine test image in [0, 255]: flat block, linear ramp, disc."""
    rows, cols = n, (n if cols is None else cols)
    i, j = np.mgrid[0:rows, 0:cols].astype(float)
    u = np.full((rows, cols), 60.0)
    ramp = j >= cols // 2
    u[ramp] = 40.0 + 160.0 * (j[ramp] - cols // 2) / max(cols // 2, 1)
    disc = (i - 0.62 * rows) ** 2 + (j - 0.3 * cols) ** 2 <= (0.2 * min(rows, cols)) ** 2
    u[disc] = 220.0
    block = (i < rows // 4) & (j > cols // 8) & (j < cols // 2 - 2)
    u[block] = 130.0
    return u
