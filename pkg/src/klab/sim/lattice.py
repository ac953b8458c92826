"""Truncated Fourier lattice on the unit torus and divergence-free fields on it.

Coefficients live in a dense array of shape (d, L, ..., L), L = 2*n_max + 1,
index i <-> wavevector n = i - n_max.  The zero mode is kept at zero.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class Lattice:
    d: int
    n_max: int

    def __post_init__(self):
        if self.d < 2 or self.n_max < 1:
            raise ValueError("lattice needs d >= 2 and n_max >= 1")

    @property
    def L(self):
        return 2 * self.n_max + 1

    @property
    def shape(self):
        return (self.L,) * self.d

    @cached_property
    def wavevectors(self):
        """Integer wavevectors, shape (d, L, ..., L)."""
        r = np.arange(-self.n_max, self.n_max + 1)
        return np.array(np.meshgrid(*([r] * self.d), indexing="ij"))

    @cached_property
    def k2(self):
        return np.sum(self.wavevectors.astype(float) ** 2, axis=0)

    @cached_property
    def mask(self):
        return self.k2 > 0

    @cached_property
    def modes(self):
        """All nonzero wavevectors as an (K, d) integer array."""
        return self.wavevectors.reshape(self.d, -1).T[self.mask.ravel()]

    def index(self, n):
        return tuple(int(c) + self.n_max for c in n)

    def weight(self, sigma):
        """|2 pi n|^(2 sigma), zero at the origin."""
        w = np.zeros(self.shape)
        w[self.mask] = (TWO_PI**2 * self.k2[self.mask]) ** sigma
        return w


def flip(c):
    """Map the entry at n to -n on the trailing d axes."""
    d = c.ndim - 1 if c.ndim > 1 else c.ndim
    axes = tuple(range(c.ndim - d, c.ndim))
    return np.flip(c, axis=axes)


def project(lat, c):
    """Leray projection n -> (I - n n^T/|n|^2) applied mode by mode."""
    n = lat.wavevectors.astype(float)
    dot = np.sum(n * c, axis=0)
    k2 = np.where(lat.mask, lat.k2, 1.0)
    out = c - n * (dot / k2)
    out[:, ~lat.mask] = 0
    return out


def realify(c):
    """Enforce c(-n) = conj(c(n))."""
    # c has shape (d, L, ..., L): flip the spatial axes only
    return 0.5 * (c + np.conj(np.flip(c, axis=tuple(range(1, c.ndim)))))


@dataclass
class SpectralField:
    lattice: Lattice
    coeffs: np.ndarray

    def __post_init__(self):
        want = (self.lattice.d,) + self.lattice.shape
        if self.coeffs.shape != want:
            raise ValueError(f"coefficient array must have shape {want}")

    @classmethod
    def zeros(cls, lat):
        return cls(lat, np.zeros((lat.d,) + lat.shape, complex))

    def norm_sq(self, sigma):
        """Homogeneous Sobolev norm squared, sum |2 pi n|^(2 sigma) |M(n)|^2."""
        w = self.lattice.weight(sigma)
        return float(np.sum(w * np.sum(np.abs(self.coeffs) ** 2, axis=0)))

    def divergence_residual(self):
        lat = self.lattice
        dot = np.abs(np.sum(lat.wavevectors * self.coeffs, axis=0))
        size = np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0)) * np.sqrt(lat.k2)
        nz = size > 0
        return float(np.max(dot[nz] / size[nz])) if nz.any() else 0.0

    def reality_residual(self):
        c = self.coeffs
        scale = max(np.max(np.abs(c)), 1e-300)
        return float(np.max(np.abs(c - np.conj(np.flip(c, axis=tuple(range(1, c.ndim)))))) / scale)

    def support(self):
        """Wavevectors carrying nonzero coefficients, (Q, d) array."""
        nz = np.any(self.coeffs != 0, axis=0)
        return self.lattice.wavevectors.reshape(self.lattice.d, -1).T[nz.ravel()]

    def copy(self):
        return SpectralField(self.lattice, self.coeffs.copy())


def random_field(lat, rng, gamma=1.0, band=None):
    """Broadband divergence-free real field, |M(n)| ~ |n|^-gamma for |n|_inf <= band."""
    shape = (lat.d,) + lat.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    amp = np.zeros(lat.shape)
    amp[lat.mask] = lat.k2[lat.mask] ** (-gamma / 2)
    if band is not None:
        amp[np.max(np.abs(lat.wavevectors), axis=0) > band] = 0
    c = project(lat, realify(c * amp))
    return SpectralField(lat, c)


def single_mode(lat, k, direction=None):
    """Real field direction*cos(2 pi k.x), direction projected orthogonal to k."""
    k = np.asarray(k, float)
    if direction is None:
        direction = np.zeros(lat.d)
        direction[np.argmin(np.abs(k))] = 1.0
    a = np.asarray(direction, float)
    a = a - k * (a @ k) / (k @ k)
    if np.linalg.norm(a) == 0:
        raise ValueError("direction is parallel to k")
    c = np.zeros((lat.d,) + lat.shape, complex)
    c[(slice(None),) + lat.index(k)] += a / 2
    c[(slice(None),) + lat.index(-k)] += a / 2
    return SpectralField(lat, c)
