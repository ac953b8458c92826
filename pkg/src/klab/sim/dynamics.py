"""Euler-Maruyama stepping of dM = -B[M] dW + (nu + c0/2) Delta M dt on the lattice.

B[M] dW is evaluated pseudo-spectrally as the divergence of the
antisymmetric tensor W M^T - M W^T, with padding large enough that no
aliased product lands back on the lattice.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import itertools
import math
import os

import numpy as np
from scipy import fft

from ..constants import ModelParams
from ..errors import ConfigError, StabilityError
from .lattice import TWO_PI, Lattice, SpectralField, random_field, single_mode
from .noise import build_noise_basis

GUARD = 0.5
CHUNK = 32


def _threads():
    try:
        return max(1, int(os.environ.get("KLAB_THREADS", "1")))
    except ValueError:
        return 1


class _Transform:
    """Moves lattice coefficients to a padded real grid and back."""

    def __init__(self, lat, band=None):
        N = lat.n_max
        band = N if band is None else band
        self.lat = lat
        self.P = P = fft.next_fast_len(2 * N + band + 1, real=True)
        self.axes = tuple(range(-lat.d, 0))
        self.hshape = (P,) * (lat.d - 1) + (P // 2 + 1,)
        # index n >= 0 sits at n, n < 0 at P + n: one block copy per sign pattern
        self.blocks = []
        for signs in itertools.product((0, 1), repeat=lat.d - 1):
            grid, latt = [], []
            for neg in signs:
                if neg:
                    grid.append(slice(P - N, P))
                    latt.append(slice(0, N))
                else:
                    grid.append(slice(0, N + 1))
                    latt.append(slice(N, 2 * N + 1))
            self.blocks.append((tuple(grid) + (slice(0, N + 1),), tuple(latt) + (slice(None),)))

    def to_grid(self, c):
        """Coefficients (full lattice or its n_last >= 0 half) to grid values."""
        N = self.lat.n_max
        if c.shape[-1] > N + 1:
            c = c[..., N:]
        buf = np.zeros(c.shape[: c.ndim - self.lat.d] + self.hshape, complex)
        for g, l in self.blocks:
            buf[(...,) + g] = c[(...,) + l]
        return fft.irfftn(buf, s=(self.P,) * self.lat.d, axes=self.axes, norm="forward")

    def from_grid(self, x, half=False):
        N = self.lat.n_max
        spec = fft.rfftn(x, axes=self.axes, norm="forward")
        h = np.empty(spec.shape[: spec.ndim - self.lat.d] + self.lat.shape[:-1] + (N + 1,),
                     complex)
        for g, l in self.blocks:
            h[(...,) + l] = spec[(...,) + g]
        if half:
            return h
        out = np.empty(h.shape[:-1] + (2 * N + 1,), complex)
        out[..., N:] = h
        # negative last component from the reality condition
        out[..., :N] = np.conj(np.flip(h[..., 1:], axis=self.axes))
        return out


def _half(a, lat):
    return a[..., lat.n_max:]


def noise_field(nb, xi, dt, half=False):
    """Lattice coefficients of the noise increment, shape (B, d, L, ..., L).

    xi has shape (B, 2, d-1, L, ..., L): standard normals for the cos and
    sin driver of every (k, polarization).  The real field
    sum amp a (cos(2 pi k.x) xi_c + sin(2 pi k.x) xi_s) sqrt(dt) has
    coefficient at n
    amp_n sum_j a_nj [(xi_c(n) + xi_c(-n))/2 + (xi_s(n) - xi_s(-n))/(2i)] sqrt(dt).
    With half=True only the n_last >= 0 half is returned.
    """
    lat = nb.lattice
    axes = tuple(range(1, 1 + lat.d))  # spatial axes of xi[:, 0, j]
    pol, amp = nb.pol_grid, nb.amp_grid * math.sqrt(dt)
    if half:
        pol, amp = _half(pol, lat), _half(amp, lat)
    w = 0
    for j in range(lat.d - 1):
        xc, xs = xi[:, 0, j], xi[:, 1, j]
        scal = 0.5 * (xc + np.flip(xc, axis=axes)) - 0.5j * (xs - np.flip(xs, axis=axes))
        if half:
            scal = _half(scal, lat)
        w = w + (scal * amp)[:, None] * pol[j]
    return w


def draw_noise(nb, rng, batch, dt):
    """Noise increment on the n_last >= 0 half lattice, shape (batch, d, L, ..., N+1).

    Same law as noise_field with independent cos/sin drivers: at each n the
    scalar factor (xi_c(n) + xi_c(-n))/2 - i (xi_s(n) - xi_s(-n))/2 is a
    circular complex normal with E|z|^2 = 1, and z(-n) = conj z(n).  Drawing
    z directly needs half the normals.  On the n_last = 0 plane, where n and
    -n both appear, z(n) = (z'(n) + conj z'(-n))/sqrt 2.
    """
    lat = nb.lattice
    d = lat.d
    hshape = lat.shape[:-1] + (lat.n_max + 1,)
    g = rng.standard_normal((batch, 2, d - 1) + hshape)
    re, im = g[:, 0], g[:, 1]
    flip_axes = tuple(range(2, 2 + d - 1))
    r0, i0 = re[..., 0], im[..., 0]
    re[..., 0], im[..., 0] = ((r0 + np.flip(r0, axis=flip_axes)) * math.sqrt(0.5),
                              (i0 - np.flip(i0, axis=flip_axes)) * math.sqrt(0.5))
    # z = (re - i im)/sqrt 2; each polarization carries amp a
    basis = nb.half_basis * math.sqrt(dt / 2)
    wr = re[:, 0, None] * basis[0]
    wi = im[:, 0, None] * basis[0]
    for j in range(1, d - 1):
        wr += re[:, j, None] * basis[j]
        wi += im[:, j, None] * basis[j]
    return wr - 1j * wi


def b_product(tr, c, w, grid_m=None, half=False):
    """B[M] W for coefficient arrays of shape (B, d, L, ..., L); c may have B = 1.

    w may be given on the half lattice; with half=True the output is too.
    """
    lat = tr.lat
    d = lat.d
    mx = tr.to_grid(c) if grid_m is None else grid_m
    wx = tr.to_grid(w)
    n = _half(lat.wavevectors, lat) if half else lat.wavevectors
    out = None
    for l in range(d):
        for i in range(l + 1, d):
            t = tr.from_grid(wx[:, l] * mx[:, i] - mx[:, l] * wx[:, i], half=half)
            if out is None:
                out = np.zeros((t.shape[0], d) + t.shape[1:], complex)
            out[:, i] += 2j * np.pi * n[l] * t
            out[:, l] -= 2j * np.pi * n[i] * t
    mask = _half(lat.mask, lat) if half else lat.mask
    out[..., ~mask] = 0
    return out


def _half_weight(lat, sigma):
    """Weights for norms summed over the n_last >= 0 half: pairs n, -n folded together."""
    w = 2 * _half(lat.weight(sigma), lat)
    w[..., 0] /= 2
    return w


def heat_rate(nb, nu):
    """(nu + c0/2) |2 pi n|^2 on the lattice."""
    return (nu + nb.c0_truncated / 2) * TWO_PI**2 * nb.lattice.k2


def check_stability(nb, nu, dt):
    lhs = dt * (nu + nb.c0_truncated / 2) * (TWO_PI * nb.lattice.n_max) ** 2
    if not dt > 0:
        raise StabilityError("dt must be positive")
    if lhs > GUARD:
        raise StabilityError(
            f"explicit step unstable: dt (nu + c0/2) |2 pi n_max|^2 = {lhs:.3g} > {GUARD}")


def ito_step(m, nb, nu, dt, rng, transform=None):
    """One Euler-Maruyama step; returns a new SpectralField."""
    check_stability(nb, nu, dt)
    tr = transform or _Transform(m.lattice)
    w = draw_noise(nb, rng, 1, dt)
    c = m.coeffs * (1 - dt * heat_rate(nb, nu)) - b_product(tr, m.coeffs[None], w)[0]
    return SpectralField(m.lattice, c)


def _band(field):
    sup = field.support()
    return int(np.max(np.abs(sup))) if len(sup) else 1


def one_step_drift(m, nb, nu, s, dt, n_increments, seed, batch=64):
    """Monte Carlo estimate of d/dt E||M||^2_{H^-s} from single Euler-Maruyama steps.

    Each draw xi is used with its antithetic partner -xi. With
    M_pm = M + dt A M -+ dB the pair average of ||M_pm||^2 - ||M||^2 is
    2 dt Re<M, A M> + dt^2 ||A M||^2 + ||dB||^2; the dt^2 term is a
    scheme artefact and is removed.  Returns (mean, standard error).
    """
    lat = m.lattice
    tr = _Transform(lat, band=_band(m))
    wt = _half_weight(lat, -s)
    mx = tr.to_grid(m.coeffs[None])
    lin = 2 * float(np.sum(lat.weight(-s) * np.sum(
        (np.conj(m.coeffs) * (-heat_rate(nb, nu) * m.coeffs)).real, axis=0)))
    rng = np.random.default_rng(seed)
    vals = []
    left = n_increments
    while left > 0:
        k = min(batch, left)
        db = b_product(tr, m.coeffs[None], draw_noise(nb, rng, k, dt), grid_m=mx, half=True)
        q = np.sum(wt * np.sum(db.real**2 + db.imag**2, axis=1),
                   axis=tuple(range(1, lat.d + 1)))
        vals.append(lin + q / dt)
        left -= k
    vals = np.concatenate(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def noise_contribution(m, nb, s, dt, n_increments, seed, batch=16):
    """Samples of the martingale part -2 Re<M, B[M] dW>_{H^-s} of one step."""
    lat = m.lattice
    tr = _Transform(lat, band=_band(m))
    wt = _half_weight(lat, -s)
    mh = _half(m.coeffs, lat)
    mx = tr.to_grid(m.coeffs[None])
    rng = np.random.default_rng(seed)
    out = []
    left = n_increments
    while left > 0:
        k = min(batch, left)
        db = b_product(tr, m.coeffs[None], draw_noise(nb, rng, k, dt), grid_m=mx, half=True)
        inner = np.sum(wt * np.sum((np.conj(mh) * db).real, axis=1),
                       axis=tuple(range(1, lat.d + 1)))
        out.append(-2 * inner)
        left -= k
    return np.concatenate(out)


@dataclass(frozen=True)
class SimConfig:
    lattice: Lattice
    params: ModelParams
    nu: float
    dt: float
    t_final: float
    n_paths: int
    seed: int = 0
    output_times: tuple = ()
    init: tuple = ("broadband", 1.0)  # or ("single_mode", k)
    amplitude_scale: float = 1.0

    def __post_init__(self):
        if self.n_paths < 2:
            raise ConfigError("n_paths must be >= 2")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if self.nu < 0:
            raise ConfigError("nu must be >= 0")
        if self.params.d != self.lattice.d:
            raise ConfigError("params.d and lattice.d differ")


@dataclass
class NormSeries:
    times: np.ndarray
    mean_hs_norm_sq: np.ndarray
    stderr_hs: np.ndarray
    mean_gain_norm_sq: np.ndarray
    stderr_gain: np.ndarray
    mean_l2_sq: np.ndarray
    stderr_l2: np.ndarray
    ensemble_size: int
    dt: float
    # sum_{t_k < t} dt ||M_k||^2_gain, per path, at every output time
    gain_integral_paths: np.ndarray = field(repr=False, default=None)
    hs_paths: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        n = len(self.times)
        for name in ("mean_hs_norm_sq", "stderr_hs", "mean_gain_norm_sq", "stderr_gain",
                     "mean_l2_sq", "stderr_l2"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has the wrong length")

    def rows(self):
        return zip(self.times, self.mean_hs_norm_sq, self.stderr_hs, self.mean_gain_norm_sq,
                   self.stderr_gain, self.mean_l2_sq, self.stderr_l2)


def initial_field(cfg):
    kind, arg = cfg.init[0], cfg.init[1:]
    lat = cfg.lattice
    if kind == "single_mode":
        return single_mode(lat, arg[0])
    if kind == "broadband":
        gamma = arg[0] if arg else 1.0
        band = arg[1] if len(arg) > 1 else None
        # the initial datum is shared by all paths; its stream is kept apart from theirs
        return random_field(lat, np.random.default_rng([cfg.seed, 2**32 - 1]), gamma, band)
    raise ConfigError(f"unknown init {kind!r}")


def _run_chunk(cfg, nb, dt, steps, out_idx, m0, paths):
    lat = cfg.lattice
    s, al = cfg.params.s, cfg.params.alpha
    tr = _Transform(lat)
    w_hs, w_gain, w_l2 = lat.weight(-s), lat.weight(-s + 1 - al), lat.weight(0.0)
    decay = 1 - dt * heat_rate(nb, cfg.nu)
    rngs = [np.random.default_rng([cfg.seed, p]) for p in paths]
    c = np.repeat(m0.coeffs[None], len(paths), axis=0)
    rec = np.zeros((3, len(paths), len(out_idx)))
    integ = np.zeros((len(paths), len(out_idx)))
    running = np.zeros(len(paths))
    where = {k: j for j, k in enumerate(out_idx)}

    def norms(c):
        e = np.abs(c) ** 2
        e = np.sum(e, axis=1)
        ax = tuple(range(1, lat.d + 1))
        return np.sum(w_hs * e, axis=ax), np.sum(w_gain * e, axis=ax), np.sum(w_l2 * e, axis=ax)

    for k in range(steps + 1):
        hs, gain, l2 = norms(c)
        if k in where:
            j = where[k]
            rec[:, :, j] = hs, gain, l2
            integ[:, j] = running
        if k == steps:
            break
        running = running + dt * gain
        w = np.concatenate([draw_noise(nb, r, 1, dt) for r in rngs])
        c = c * decay - b_product(tr, c, w)
    return rec, integ


def run_ensemble(cfg):
    """Evolve cfg.n_paths independent paths and collect Sobolev norm statistics.

    dt is halved until the explicit-step guard holds. Path p draws from
    default_rng([seed, p]) and results are reduced in path order, so the
    output does not depend on KLAB_THREADS.
    """
    lat = cfg.lattice
    nb = build_noise_basis(lat, cfg.params.alpha, cfg.amplitude_scale)
    dt = cfg.dt
    while True:
        try:
            check_stability(nb, cfg.nu, dt)
            break
        except StabilityError:
            dt /= 2
    steps = int(math.ceil(cfg.t_final / dt - 1e-9))
    times = cfg.output_times or (cfg.t_final,)
    out_idx = sorted({min(steps, int(round(t / dt))) for t in (0.0, *times)})
    m0 = initial_field(cfg)
    chunks = [list(range(i, min(i + CHUNK, cfg.n_paths))) for i in range(0, cfg.n_paths, CHUNK)]
    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        parts = list(ex.map(lambda p: _run_chunk(cfg, nb, dt, steps, out_idx, m0, p), chunks))
    rec = np.concatenate([r for r, _ in parts], axis=1)
    integ = np.concatenate([g for _, g in parts], axis=0)
    n = cfg.n_paths

    def stats(a):
        return a.mean(axis=0), a.std(axis=0, ddof=1) / math.sqrt(n)

    (mh, sh), (mg, sg), (ml, sl) = (stats(rec[i]) for i in range(3))
    return NormSeries(np.array(out_idx) * dt, mh, sh, mg, sg, ml, sl, n, dt,
                      gain_integral_paths=integ, hs_paths=rec[0])


def lyapunov_check(series, eta_hat, rho_hat, index=-1):
    """Both sides of E||M_t||^2 + eta_hat sum dt E||M||^2_gain <= e^(rho_hat t) ||M_0||^2.

    Returns (lhs mean, lhs standard error, rhs) at output index `index`;
    the standard error is taken from the per-path combination.
    """
    n = series.ensemble_size
    per_path = series.hs_paths[:, index] + eta_hat * series.gain_integral_paths[:, index]
    lhs = float(per_path.mean())
    err = float(per_path.std(ddof=1) / math.sqrt(n))
    rhs = math.exp(rho_hat * series.times[index]) * float(series.hs_paths[0, 0])
    return lhs, err, rhs
