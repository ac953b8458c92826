"""Kraichnan-type noise on the lattice: real cos/sin modes with transverse polarizations."""
from dataclasses import dataclass
import math
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .lattice import TWO_PI, Lattice

ISOTROPY_TOL = 1e-14


class NoiseMode(NamedTuple):
    k: tuple
    a: np.ndarray
    amplitude: float
    phase: str  # "cos" or "sin"


def transverse_basis(k):
    """d-1 orthonormal vectors spanning k-perp; identical output for k and -k."""
    k = np.asarray(k, float)
    proj = np.eye(len(k)) - np.outer(k, k) / (k @ k)
    vals, vecs = np.linalg.eigh(proj)
    return vecs[:, vals > 0.5].T


@dataclass(frozen=True)
class NoiseBasis:
    lattice: Lattice
    alpha: float
    amplitude_scale: float = 1.0

    @cached_property
    def wavevectors(self):
        return self.lattice.modes

    @cached_property
    def amplitudes(self):
        k2 = np.sum(self.wavevectors.astype(float) ** 2, axis=1)
        d = self.lattice.d
        return self.amplitude_scale * (1 + k2) ** (-(d + 2 * self.alpha) / 4)

    @cached_property
    def polarizations(self):
        """(K, d-1, d) array; row j of entry i is the j-th polarization of k_i."""
        return np.array([transverse_basis(k) for k in self.wavevectors])

    @cached_property
    def amp_grid(self):
        lat = self.lattice
        g = np.zeros(lat.shape)
        g[lat.mask] = self.amplitudes
        return g

    @cached_property
    def pol_grid(self):
        """Polarizations laid out on the lattice, shape (d-1, d, L, ..., L)."""
        lat = self.lattice
        g = np.zeros((lat.d - 1, lat.d) + lat.shape)
        flat = g.reshape(lat.d - 1, lat.d, -1)
        flat[:, :, lat.mask.ravel()] = self.polarizations.transpose(1, 2, 0)
        return g

    @cached_property
    def half_basis(self):
        """amp * polarization on the n_last >= 0 half lattice, contiguous."""
        n = self.lattice.n_max
        return np.ascontiguousarray((self.pol_grid * self.amp_grid)[..., n:])

    @cached_property
    def covariance(self):
        """Pointwise covariance per unit time, sum over modes of amp^2 a a^T.

        sum_j a a^T is the projector I - k k^T/|k|^2; entries are summed
        with fsum so that the lattice symmetries survive rounding.
        """
        k = self.wavevectors.astype(float)
        k2 = np.sum(k * k, axis=1)
        amp2 = self.amplitudes**2
        d = self.lattice.d
        cov = np.empty((d, d))
        for i in range(d):
            for j in range(d):
                terms = amp2 * ((i == j) - k[:, i] * k[:, j] / k2)
                cov[i, j] = math.fsum(terms)
        return cov

    @cached_property
    def c0_truncated(self):
        cov = self.covariance
        d = self.lattice.d
        c0 = float(np.trace(cov)) / d
        off = np.max(np.abs(cov[~np.eye(d, dtype=bool)]))
        spread = np.ptp(np.diag(cov))
        if max(off, spread) > ISOTROPY_TOL * c0:
            raise ArithmeticError(f"noise covariance is not isotropic (residual {max(off, spread):.2e})")
        return c0

    @property
    def modes(self):
        for k, pols, amp in zip(self.wavevectors, self.polarizations, self.amplitudes):
            for a in pols:
                for phase in ("cos", "sin"):
                    yield NoiseMode(tuple(int(x) for x in k), a, float(amp), phase)

    def __len__(self):
        return 2 * (self.lattice.d - 1) * len(self.wavevectors)


def build_noise_basis(lat, alpha, amplitude_scale=1.0):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    nb = NoiseBasis(lat, float(alpha), float(amplitude_scale))
    nb.c0_truncated  # certify isotropy up front
    return nb


def l2_drift_coefficient(nb):
    """Coefficient of ||M||_L2^2 growth produced by the stretching term:
    ((d-1)/d) sum_k amp_k^2 |2 pi k|^2."""
    d = nb.lattice.d
    k2 = np.sum(nb.wavevectors.astype(float) ** 2, axis=1)
    return float((d - 1) / d * np.sum(nb.amplitudes**2 * TWO_PI**2 * k2))


def transport_coefficient(nb):
    """sum_k amp_k^2 (2 pi)^2 P_perp(k) as a matrix; equals c0_truncated (2 pi)^2 I."""
    return TWO_PI**2 * nb.covariance


def mixed_term(nb):
    """sum_k amp_k^2 k (the odd moment); zero by k -> -k symmetry.

    fsum keeps the pairwise cancellation exact.
    """
    terms = nb.amplitudes[:, None] ** 2 * nb.wavevectors
    return np.array([math.fsum(col) for col in terms.T])
