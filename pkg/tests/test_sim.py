import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from klab.constants import ModelParams
from klab.errors import ConfigError, StabilityError
from klab.sim import (IdentityMismatch, Lattice, SimConfig, SpectralField, apply_b, b_product,
                      build_noise_basis, canonical_modes, check_stability, draw_noise,
                      exact_drift, f_lattice, fit_lattice_constants, h_lattice, hs_direct,
                      hs_lattice_sum, ito_step, l2_drift_coefficient, mixed_term, NoiseMode,
                      noise_contribution, noise_field, one_step_drift, random_field, run_ensemble,
                      single_mode, transport_coefficient, transverse_basis)
from klab.sim import drift as drift_mod
from klab.sim.dynamics import _Transform

TWO_PI = 2 * math.pi


def field(d, n_max, seed, band=None):
    lat = Lattice(d, n_max)
    return random_field(lat, np.random.default_rng(seed), band=band)


class TestLattice:
    @pytest.mark.parametrize("d,n", [(2, 1), (2, 5), (3, 1), (3, 4), (4, 2)])
    def test_mode_count(self, d, n):
        lat = Lattice(d, n)
        assert len(lat.modes) == (2 * n + 1) ** d - 1

    def test_symmetric(self):
        modes = {tuple(m) for m in Lattice(3, 2).modes}
        assert all(tuple(-x for x in m) in modes for m in modes)
        assert all(tuple(m[i] for i in (2, 0, 1)) in modes for m in modes)

    def test_weight_zero_mode(self):
        lat = Lattice(2, 3)
        w = lat.weight(-1.25)
        assert w[lat.index((0, 0))] == 0
        assert w[lat.index((1, 0))] == pytest.approx(TWO_PI ** -2.5)

    def test_random_field_invariants(self):
        f = field(3, 4, 0)
        assert f.divergence_residual() <= 1e-14
        assert f.reality_residual() <= 1e-15
        assert np.all(f.coeffs[(slice(None),) + f.lattice.index((0, 0, 0))] == 0)

    def test_band(self):
        f = field(3, 6, 1, band=2)
        assert np.max(np.abs(f.support())) == 2

    def test_single_mode(self):
        lat = Lattice(3, 2)
        f = single_mode(lat, (1, 2, 0))
        assert {tuple(m) for m in f.support()} == {(1, 2, 0), (-1, -2, 0)}
        assert f.divergence_residual() == 0
        with pytest.raises(ValueError):
            single_mode(lat, (1, 0, 0), direction=(2, 0, 0))

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            SpectralField(Lattice(2, 2), np.zeros((2, 4, 4)))


class TestNoiseBasis:
    def test_count_d3(self):
        nb = build_noise_basis(Lattice(3, 1), 0.25)
        assert len(nb.wavevectors) == 26
        assert len(nb) == 26 * 2 * 2 == len(list(nb.modes))

    def test_polarizations(self):
        nb = build_noise_basis(Lattice(3, 3), 0.25)
        k = nb.wavevectors.astype(float)
        pol = nb.polarizations
        assert np.max(np.abs(np.einsum("kjd,kd->kj", pol, k))) < 1e-14
        gram = np.einsum("kid,kjd->kij", pol, pol)
        assert np.max(np.abs(gram - np.eye(2))) < 1e-14

    def test_basis_even(self):
        for k in [(1, 2, 3), (0, 0, 1), (2, -1, 0)]:
            assert np.array_equal(transverse_basis(k), transverse_basis(tuple(-x for x in k)))

    def test_amplitudes(self):
        nb = build_noise_basis(Lattice(2, 2), 0.3)
        k2 = np.sum(nb.wavevectors ** 2, axis=1)
        assert np.allclose(nb.amplitudes, (1 + k2) ** (-(2 + 0.6) / 4), rtol=1e-15, atol=0)

    @pytest.mark.parametrize("d,n", [(2, 7), (3, 5), (3, 16)])
    def test_isotropy_exact(self, d, n):
        nb = build_noise_basis(Lattice(d, n), 0.25)
        cov = nb.covariance
        assert np.all(cov[~np.eye(d, dtype=bool)] == 0)
        assert np.ptp(np.diag(cov)) <= 1e-14 * nb.c0_truncated

    def test_c0_riemann_sum(self):
        # independent brute-force loop over the lattice
        d, n, a = 3, 4, 0.25
        tot = math.fsum((1 + sum(x * x for x in k)) ** (-(d + 2 * a) / 2)
                        for k in itertools.product(range(-n, n + 1), repeat=d) if any(k))
        nb = build_noise_basis(Lattice(d, n), a)
        assert nb.c0_truncated == pytest.approx((d - 1) / d * tot, rel=1e-14)

    def test_c0_monotone_convergent(self):
        vals = [build_noise_basis(Lattice(3, n), 0.25).c0_truncated for n in range(1, 9)]
        inc = np.diff(vals)
        assert np.all(inc > 0)
        assert np.all(np.diff(inc) < 0)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            build_noise_basis(Lattice(2, 2), 1.0)


class TestLatticeSums:
    def test_l2_growth_rate(self):
        a = 0.25
        c = [l2_drift_coefficient(build_noise_basis(Lattice(3, n), a)) for n in (8, 16)]
        assert math.log2(c[1] / c[0]) == pytest.approx(2 - 2 * a, abs=0.1)

    def test_transport_matches_laplacian(self):
        nb = build_noise_basis(Lattice(3, 6), 0.25)
        t = transport_coefficient(nb)
        assert np.max(np.abs(t - nb.c0_truncated * TWO_PI ** 2 * np.eye(3))) <= 1e-12 * t[0, 0]

    def test_mixed_term_vanishes(self):
        nb = build_noise_basis(Lattice(3, 5), 0.4)
        assert np.all(mixed_term(nb) == 0)


class TestApplyB:
    def test_zero(self):
        lat = Lattice(3, 2)
        nb = build_noise_basis(lat, 0.25)
        mode = next(iter(nb.modes))
        assert np.all(apply_b(SpectralField.zeros(lat), mode).coeffs == 0)

    def test_support(self):
        lat = Lattice(3, 4)
        nb = build_noise_basis(lat, 0.25)
        m = single_mode(lat, (1, 0, 0), direction=(0, 1, 0))
        for mode in list(nb.modes)[::37]:
            out = apply_b(m, mode)
            k = np.array(mode.k)
            allowed = {tuple(s * (np.array((1, 0, 0)) + t * k)) for s in (1, -1) for t in (1, -1)}
            allowed = {tuple(int(x) for x in a) for a in allowed}
            got = {tuple(int(x) for x in row) for row in out.support()}
            assert got <= allowed

    def test_divergence_free_random_pairs(self):
        rng = np.random.default_rng(5)
        lat = Lattice(3, 3)
        nb = build_noise_basis(lat, 0.25)
        modes = list(nb.modes)
        for _ in range(100):
            f = random_field(lat, rng)
            out = apply_b(f, modes[rng.integers(len(modes))])
            assert out.divergence_residual() <= 1e-13
            assert out.reality_residual() <= 1e-13

    def test_pseudo_spectral_matches_mode_sum(self):
        lat = Lattice(2, 3)
        nb = build_noise_basis(lat, 0.3)
        f = random_field(lat, np.random.default_rng(2))
        rng = np.random.default_rng(3)
        xi = rng.standard_normal((1, 2, 1) + lat.shape)
        dt = 1e-3
        w = noise_field(nb, xi, dt)
        fast = b_product(_Transform(lat), f.coeffs[None], w)[0]
        slow = np.zeros_like(f.coeffs)
        for k, pols, amp in zip(nb.wavevectors, nb.polarizations, nb.amplitudes):
            for j, a in enumerate(pols):
                idx = lat.index(k)
                for p, phase in enumerate(("cos", "sin")):
                    mode = apply_b(f, NoiseMode(tuple(k), a, amp, phase))
                    slow += math.sqrt(dt) * xi[(0, p, j) + idx] * mode.coeffs
        assert np.max(np.abs(fast - slow)) <= 1e-13 * np.max(np.abs(slow))


class TestNoiseLaw:
    def test_half_lattice_covariance(self):
        lat = Lattice(2, 3)
        nb = build_noise_basis(lat, 0.3)
        dt = 0.01
        w = draw_noise(nb, np.random.default_rng(0), 20000, dt)
        e = np.mean(np.sum(np.abs(w) ** 2, axis=1), axis=0)
        want = (nb.amp_grid ** 2 * dt)[..., lat.n_max:]
        nz = want > 0
        # d-1 = 1 polarization, E|z|^2 = 1; 20000 draws give ~1% scatter
        assert np.max(np.abs(e[nz] / want[nz] - 1)) < 0.06
        assert np.all(e[~nz] == 0)

    def test_half_lattice_reality_plane(self):
        lat = Lattice(3, 2)
        nb = build_noise_basis(lat, 0.25)
        w = draw_noise(nb, np.random.default_rng(1), 3, 0.1)[..., 0]  # n_last = 0 plane
        assert np.allclose(w, np.conj(np.flip(w, axis=(2, 3))), atol=1e-15)

    def test_divergence_free(self):
        lat = Lattice(3, 2)
        nb = build_noise_basis(lat, 0.25)
        w = draw_noise(nb, np.random.default_rng(1), 2, 0.1)
        n = lat.wavevectors[..., lat.n_max:]
        assert np.max(np.abs(np.sum(n[None] * w, axis=1))) < 1e-15


class TestItoStep:
    def test_zero(self):
        lat = Lattice(3, 3)
        nb = build_noise_basis(lat, 0.25)
        out = ito_step(SpectralField.zeros(lat), nb, 0.5, 1e-4, np.random.default_rng(0))
        assert np.all(out.coeffs == 0)

    def test_heat_step(self):
        lat = Lattice(3, 3)
        nb = build_noise_basis(lat, 0.25, amplitude_scale=0.0)
        m = single_mode(lat, (1, 2, 0))
        nu, dt = 0.3, 1e-3
        out = ito_step(m, nb, nu, dt, np.random.default_rng(0))
        factor = 1 - dt * nu * TWO_PI ** 2 * 5
        assert np.allclose(out.coeffs, factor * m.coeffs, rtol=1e-15, atol=1e-17)

    def test_invariants_preserved(self):
        lat = Lattice(3, 4)
        nb = build_noise_basis(lat, 0.25)
        m = random_field(lat, np.random.default_rng(3))
        rng = np.random.default_rng(4)
        for _ in range(5):
            m = ito_step(m, nb, 0.1, 1e-4, rng)
        assert m.divergence_residual() <= 1e-12
        assert m.reality_residual() <= 1e-12

    def test_guard(self):
        nb = build_noise_basis(Lattice(3, 8), 0.25)
        with pytest.raises(StabilityError):
            check_stability(nb, 1.0, 1e-2)
        check_stability(nb, 1.0, 3e-5)


class TestExactDrift:
    def test_zero(self):
        lat = Lattice(2, 3)
        nb = build_noise_basis(lat, 0.3)
        assert exact_drift(SpectralField.zeros(lat), nb, 1.0, 0.9) == 0

    @pytest.mark.parametrize("d,n", [(2, 4), (2, 8), (3, 3)])
    def test_isometry_routes(self, d, n):
        nb = build_noise_basis(Lattice(d, n), 0.3)
        for seed in range(3):
            f = field(d, n, seed)
            a, b = hs_direct(f, nb, 0.9), hs_lattice_sum(f, nb, 0.9)
            assert abs(a - b) <= 1e-10 * abs(a)

    def test_single_mode_symbol(self):
        lat = Lattice(3, 4)
        nb = build_noise_basis(lat, 0.25)
        n0 = np.array([1, 2, 0])
        a = np.array([2.0, -1.0, 0.0]) / math.sqrt(5)
        m = single_mode(lat, n0, direction=a)
        H = h_lattice(nb, 0.0, 1.25, np.array([n0, -n0]))
        # two coefficients a/2 at +-n0
        oracle = sum(0.25 * a @ h @ a for h in H)
        assert exact_drift(m, nb, 0.0, 1.25) == pytest.approx(oracle, rel=1e-12)

    def test_mismatch_detected(self, monkeypatch):
        lat = Lattice(2, 3)
        nb = build_noise_basis(lat, 0.3)
        f = field(2, 3, 0)
        real = drift_mod.f_lattice
        monkeypatch.setattr(drift_mod, "f_lattice", lambda *a: 1.001 * real(*a))
        with pytest.raises(IdentityMismatch):
            exact_drift(f, nb, 0.0, 0.9)

    def test_symbol_symmetry(self):
        # H_lat(R m) = R H_lat(m) R^T for a signed permutation R
        nb = build_noise_basis(Lattice(3, 4), 0.25)
        m = np.array([1, 2, 3])
        R = np.array([[0, 1, 0], [0, 0, -1], [1, 0, 0]])
        F = f_lattice(nb, 1.25, np.array([m, R @ m]))
        assert np.allclose(F[1], R @ F[0] @ R.T, rtol=1e-12, atol=1e-12 * np.abs(F[0]).max())

    def test_canonical_modes(self):
        modes = canonical_modes(Lattice(3, 2))
        assert len(modes) == math.comb(3 + 2, 3) - 1
        assert np.all(np.diff(modes, axis=1) >= 0)

    def test_fitted_constants_admissible(self):
        lat = Lattice(3, 8)
        nb = build_noise_basis(lat, 0.25)
        eta, rho = fit_lattice_constants(nb, 1.25, canonical_modes(lat), band=(1, 4))
        assert eta > 0 and rho >= 0


class TestStochastic:
    def test_martingale(self):
        lat = Lattice(3, 4)
        nb = build_noise_basis(lat, 0.25)
        m = field(3, 4, 0, band=2)
        x = noise_contribution(m, nb, 1.25, 1e-4, 10_000, seed=1)
        assert abs(x.mean()) <= 3 * x.std(ddof=1) / math.sqrt(len(x))

    def test_one_step_drift(self):
        lat = Lattice(2, 4)
        nb = build_noise_basis(lat, 0.3)
        m = field(2, 4, 0, band=2)
        exact = exact_drift(m, nb, 0.2, 0.9)
        mean, se = one_step_drift(m, nb, 0.2, 0.9, 1e-4, 20_000, seed=2)
        assert abs(mean - exact) <= 4 * se

    def test_one_step_deterministic(self):
        lat = Lattice(2, 3)
        nb = build_noise_basis(lat, 0.3)
        m = field(2, 3, 0)
        assert (one_step_drift(m, nb, 0.0, 0.9, 1e-4, 64, seed=9)
                == one_step_drift(m, nb, 0.0, 0.9, 1e-4, 64, seed=9))


def _cfg(**kw):
    base = dict(lattice=Lattice(3, 4), params=ModelParams(3, 1.25, 0.25), nu=0.5, dt=1e-4,
                t_final=2e-3, n_paths=6, seed=3, output_times=(1e-3, 2e-3),
                init=("broadband", 1.0, 2))
    base.update(kw)
    return SimConfig(**base)


class TestEnsemble:
    def test_heat_decay_exact(self):
        cfg = _cfg(amplitude_scale=0.0, init=("single_mode", (1, 1, 0)))
        out = run_ensemble(cfg)
        factor = (1 - out.dt * 0.5 * TWO_PI ** 2 * 2) ** 2
        steps = np.rint(out.times / out.dt)
        hs0 = single_mode(cfg.lattice, (1, 1, 0)).norm_sq(-1.25)
        assert np.allclose(out.mean_hs_norm_sq, hs0 * factor ** steps, rtol=1e-13)
        assert np.all(out.stderr_hs == 0)

    def test_reproducible(self, monkeypatch):
        a = run_ensemble(_cfg())
        monkeypatch.setenv("KLAB_THREADS", "4")
        b = run_ensemble(_cfg(n_paths=6))
        for x, y in zip(a.rows(), b.rows()):
            assert x == y
        c = run_ensemble(_cfg(seed=4))
        assert c.mean_hs_norm_sq[-1] != a.mean_hs_norm_sq[-1]

    def test_series_shape(self):
        out = run_ensemble(_cfg())
        assert len(out.times) == 3 and out.times[0] == 0
        assert out.ensemble_size == 6
        for arr in (out.mean_hs_norm_sq, out.mean_gain_norm_sq, out.mean_l2_sq, out.stderr_l2):
            assert np.all(arr >= 0)

    def test_step_halving(self):
        out = run_ensemble(_cfg(dt=1e-2, t_final=1e-2, output_times=()))
        nb = build_noise_basis(Lattice(3, 4), 0.25)
        check_stability(nb, 0.5, out.dt)
        assert out.dt < 1e-2

    def test_config_errors(self):
        with pytest.raises(ConfigError):
            _cfg(n_paths=1)
        with pytest.raises(ConfigError):
            _cfg(nu=-1.0)
        with pytest.raises(ConfigError):
            _cfg(params=ModelParams(2, 0.9, 0.3))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(2, 3), (3, 2)]))
def test_invariants_property(seed, dn):
    d, n = dn
    lat = Lattice(d, n)
    nb = build_noise_basis(lat, 0.35)
    rng = np.random.default_rng(seed)
    m = random_field(lat, rng)
    out = ito_step(m, nb, 0.0, 1e-4, rng)
    assert out.divergence_residual() <= 1e-12
    assert out.reality_residual() <= 1e-12
    assert abs(hs_direct(m, nb, 0.8) - hs_lattice_sum(m, nb, 0.8)) <= 1e-10 * hs_direct(m, nb, 0.8)
