"""B[M] applied to noise modes, and the exact drift of ||M||^2 in H^-s.

Two routes to the Ito correction sum_modes ||B[M] sigma||^2_{H^-s}:
  hs_direct       loop over the real noise modes and take norms of the outputs
  hs_lattice_sum  the quadratic form sum_m M(m)^* F_lat(m) M(m) with the
                  per-mode matrix F_lat built from the lattice sum over n = m + k
At finite truncation these agree to rounding.
"""
import itertools

import numpy as np

from ..errors import KlabError
from .lattice import TWO_PI, SpectralField

IDENTITY_TOL = 1e-10


class IdentityMismatch(KlabError, AssertionError):
    pass


def _shift(c, k):
    """Move the entry at m to m + k on the trailing len(k) axes; drop what falls off."""
    d = len(k)
    L = c.shape[-1]
    out = np.zeros_like(c)
    lead = (slice(None),) * (c.ndim - d)
    src, dst = [], []
    for ki in k:
        ki = int(ki)
        src.append(slice(max(0, -ki), L - max(0, ki)))
        dst.append(slice(max(0, ki), L - max(0, -ki)))
    out[lead + tuple(dst)] = c[lead + tuple(src)]
    return out


def _exp_b(lat, c, k, pols):
    """B[M] for the complex noise e^{2 pi i k.x} a, every a in pols (J, d).

    Produced mode n gets 2 pi i [(a.(n-k)) M(n-k) - (M(n-k).k) a].
    Returns shape (J, d, L, ..., L).
    """
    sh = _shift(c, k)  # sh[n] = M(n-k)
    nm = _shift(lat.wavevectors.astype(float), k)  # n-k at n (junk where sh = 0)
    kk = np.asarray(k, float).reshape((-1,) + (1,) * lat.d)
    mk = np.sum(sh * kk, axis=0)
    a = pols.reshape(pols.shape + (1,) * lat.d)
    an = np.einsum("jd...,d...->j...", a, nm)
    out = 2j * np.pi * (an[:, None] * sh[None] - a * mk[None, None])
    out[:, :, ~lat.mask] = 0
    return out


def apply_b(field, mode):
    """B[M] sigma for a single real noise mode (k, a, amplitude, phase)."""
    lat = field.lattice
    pols = np.asarray(mode.a, float)[None]
    plus = _exp_b(lat, field.coeffs, mode.k, pols)[0]
    minus = _exp_b(lat, field.coeffs, tuple(-x for x in mode.k), pols)[0]
    if mode.phase == "cos":
        out = 0.5 * (plus + minus)
    elif mode.phase == "sin":
        out = (plus - minus) / 2j
    else:
        raise ValueError(f"unknown phase {mode.phase!r}")
    return SpectralField(lat, mode.amplitude * out)


def hs_direct(field, nb, s):
    """sum over real noise modes of ||B[M] sigma||^2_{H^-s}."""
    lat = field.lattice
    w = lat.weight(-s)
    total = 0.0
    for k, pols, amp in zip(nb.wavevectors, nb.polarizations, nb.amplitudes):
        plus = _exp_b(lat, field.coeffs, k, pols)
        minus = _exp_b(lat, field.coeffs, -k, pols)
        cos = 0.5 * (plus + minus)
        sin = (plus - minus) / 2j
        e = np.sum(np.abs(cos) ** 2, axis=(0, 1)) + np.sum(np.abs(sin) ** 2, axis=(0, 1))
        total += amp**2 * float(np.sum(w * e))
    return total


def f_lattice(nb, s, modes):
    """F_lat(m) for each row of modes, shape (Q, d, d).

    F_lat(m) = sum_{n = m + k, k != 0, |k|, |n| <= n_max}
        amp_k^2 (2 pi)^2 |2 pi n|^(-2s)
        [ |P_k n|^2 I + (d-1) n n^T - (P_k n) n^T - n (P_k n)^T ]
    """
    lat = nb.lattice
    d = lat.d
    N = lat.n_max
    n = lat.wavevectors.reshape(d, -1).T.astype(float)
    n2 = np.sum(n * n, axis=1)
    w = np.zeros_like(n2)
    w[n2 > 0] = (TWO_PI**2 * n2[n2 > 0]) ** (-s)
    expo = -(d + 2 * nb.alpha) / 2
    scale2 = nb.amplitude_scale**2
    out = np.zeros((len(modes), d, d))
    eye = np.eye(d)
    for q, m in enumerate(np.asarray(modes, float)):
        k = n - m
        ok = (np.max(np.abs(k), axis=1) <= N) & (n2 > 0)
        k2 = np.sum(k * k, axis=1)
        ok &= k2 > 0
        kk, nn, ww = k[ok], n[ok], w[ok]
        amp2 = scale2 * (1 + k2[ok]) ** expo
        pn = nn - kk * (np.sum(kk * nn, axis=1) / k2[ok])[:, None]
        c = TWO_PI**2 * amp2 * ww
        pn2 = np.sum(pn * pn, axis=1)
        out[q] = (np.sum(c * pn2) * eye
                  + (d - 1) * np.einsum("i,ia,ib->ab", c, nn, nn)
                  - np.einsum("i,ia,ib->ab", c, pn, nn)
                  - np.einsum("i,ia,ib->ab", c, nn, pn))
    return out


def _support_values(field):
    lat = field.lattice
    modes = field.support()
    idx = tuple((modes + lat.n_max).T)
    vals = field.coeffs[(slice(None),) + idx].T  # (Q, d)
    return modes, vals


def hs_lattice_sum(field, nb, s, symbol=None):
    modes, vals = _support_values(field)
    if len(modes) == 0:
        return 0.0
    F = f_lattice(nb, s, modes) if symbol is None else symbol
    return float(np.real(np.einsum("qa,qab,qb->", np.conj(vals), F, vals)))


def exact_drift(field, nb, nu, s, check=True):
    """d/dt E||M||^2_{H^-s} at M: -(2 nu + c0) ||M||^2_{H^{1-s}} + HS term.

    With check=True the HS term is computed both ways and an
    IdentityMismatch is raised if they differ beyond 1e-10 relative.
    """
    lat_sum = hs_lattice_sum(field, nb, s)
    if check:
        direct = hs_direct(field, nb, s)
        scale = max(abs(direct), abs(lat_sum), 1e-300)
        if abs(direct - lat_sum) > IDENTITY_TOL * scale:
            raise IdentityMismatch(
                f"HS routes disagree: direct {direct!r}, lattice {lat_sum!r}")
    return -(2 * nu + nb.c0_truncated) * field.norm_sq(1 - s) + lat_sum


def h_lattice(nb, nu, s, modes):
    """Per-mode drift matrix H_lat(m) = F_lat(m) - (2 nu + c0)|2 pi m|^(2-2s) I."""
    modes = np.asarray(modes, float)
    F = f_lattice(nb, s, modes)
    g = (TWO_PI**2 * np.sum(modes**2, axis=1)) ** (1 - s)
    return F - (2 * nu + nb.c0_truncated) * g[:, None, None] * np.eye(nb.lattice.d)


def transverse_extreme(H, modes, largest=True):
    """Extreme eigenvalue of H_lat(m) restricted to m-perp, per mode."""
    out = np.empty(len(modes))
    for q, (h, m) in enumerate(zip(H, np.asarray(modes, float))):
        p = np.eye(len(m)) - np.outer(m, m) / (m @ m)
        vals = np.linalg.eigvalsh(p @ h @ p)
        vals = vals[np.argsort(np.abs(vals))][1:]  # drop the zero from the m direction
        out[q] = vals.max() if largest else vals.min()
    return out


def fit_lattice_constants(nb, s, modes, band=None, nu=0.0):
    """Fit the lattice drift to -eta_hat g + rho_hat w.

    g = |2 pi m|^(2-2s-2alpha), w = |2 pi m|^(-2s).  eta_hat is the
    least-squares slope of -lambda_max(m) against g over the modes whose
    sup-norm lies in band (default: all); rho_hat is then the smallest
    nonnegative rho with lambda_max(m) <= -eta_hat g + rho w for every
    mode given.  Returns (eta_hat, rho_hat).
    """
    modes = np.asarray(modes, float)
    H = h_lattice(nb, nu, s, modes)
    lam = transverse_extreme(H, modes)
    k2 = TWO_PI**2 * np.sum(modes**2, axis=1)
    g = k2 ** (1 - s - nb.alpha)
    w = k2 ** (-s)
    sel = np.ones(len(modes), bool)
    if band is not None:
        sup = np.max(np.abs(modes), axis=1)
        sel = (sup >= band[0]) & (sup <= band[1])
    eta = float(-np.sum(lam[sel] * g[sel]) / np.sum(g[sel] ** 2))
    rho = float(max(0.0, np.max((lam + eta * g) / w)))
    return eta, rho


def canonical_modes(lat):
    """One representative 0 <= m_1 <= ... <= m_d per signed-permutation orbit, m != 0.

    H_lat(R m) = R H_lat(m) R^T for signed permutations R, so eigenvalues
    need only be computed on these.
    """
    r = range(lat.n_max + 1)
    reps = [m for m in itertools.combinations_with_replacement(r, lat.d) if any(m)]
    return np.array(reps, dtype=int)
