"""Truncated Fourier-Galerkin simulation of the stochastic vector advection equation."""
from .drift import (IdentityMismatch, apply_b, canonical_modes, exact_drift, f_lattice,
                    fit_lattice_constants, h_lattice, hs_direct, hs_lattice_sum,
                    transverse_extreme)
from .dynamics import (NormSeries, SimConfig, b_product, check_stability, draw_noise,
                       initial_field, ito_step, noise_contribution, noise_field,
                       lyapunov_check, one_step_drift, run_ensemble)
from .lattice import Lattice, SpectralField, project, random_field, realify, single_mode
from .noise import (NoiseBasis, NoiseMode, build_noise_basis, l2_drift_coefficient,
                    mixed_term, transport_coefficient, transverse_basis)

__all__ = [
    "IdentityMismatch", "Lattice", "NoiseBasis", "NoiseMode", "NormSeries", "SimConfig",
    "SpectralField", "apply_b", "b_product", "build_noise_basis", "canonical_modes",
    "check_stability", "draw_noise", "exact_drift", "f_lattice", "fit_lattice_constants",
    "h_lattice", "hs_direct", "hs_lattice_sum", "initial_field", "ito_step",
    "l2_drift_coefficient", "lyapunov_check", "mixed_term", "noise_contribution", "noise_field",
    "one_step_drift", "project", "random_field", "realify", "run_ensemble", "single_mode",
    "transport_coefficient", "transverse_basis", "transverse_extreme",
]
