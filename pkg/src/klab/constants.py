"""Closed-form constants of the Kazantsev-Kraichnan model and the
admissible (s, alpha) region."""
from dataclasses import dataclass, asdict
import math

from scipy import integrate

from .errors import DivergenceError, DomainError, NonConvergenceError
from .specfun import log_gamma, gamma_real

BOUNDARY_TOL = 1e-8


@dataclass(frozen=True)
class ModelParams:
    d: int
    s: float
    alpha: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.d}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"need 0 < alpha < 1, got alpha={self.alpha}")
        object.__setattr__(self, "d", int(self.d))

    @property
    def sobolev_ok(self):
        return 0 < self.s < self.d / 2

    @property
    def gamma_ok(self):
        return self.s + self.alpha > 1

    @property
    def admissibility(self):
        """'inside', 'boundary' or 'outside' the region where eta > 0."""
        rb = region_bounds(self.d, self.alpha)
        if self.d < 3 or not self.alpha < min(rb.alpha_hat_plus, 1.0):
            return "outside"
        if rb.delta_s < 0:
            return "outside"
        if (abs(self.s - rb.s_hat_minus) < BOUNDARY_TOL
                or abs(self.s - rb.s_hat_plus) < BOUNDARY_TOL):
            return "boundary"
        lo, hi = rb.interval
        return "inside" if lo < self.s < hi else "outside"


@dataclass(frozen=True)
class RegionBounds:
    d: int
    alpha: float
    alpha_hat_plus: float
    alpha_hat_minus: float
    s_hat_minus: float
    s_hat_plus: float
    s_cap: float
    delta_s: float
    alpha_roots_of_s: tuple
    delta_alpha: float
    s_for_alpha_roots: float = math.nan

    @property
    def interval(self):
        """Admissible s-interval (lo, hi); lo >= hi means empty."""
        if self.d < 3 or self.delta_s < 0 or not self.alpha < min(self.alpha_hat_plus, 1.0):
            return (math.nan, math.nan)
        return (self.s_hat_minus, min(self.s_hat_plus, self.s_cap))

    @property
    def empty(self):
        lo, hi = self.interval
        return not lo < hi

    def as_dict(self):
        out = asdict(self)
        out["alpha_roots_of_s"] = list(self.alpha_roots_of_s)
        lo, hi = self.interval
        out["interval"] = [lo, hi]
        out["empty"] = self.empty
        return out


def _alpha_hat(d):
    if d == 2:
        return math.inf, -math.inf
    r = 0.25 * math.sqrt(2 * (d - 1) ** 3 / (d - 2))
    return -(d - 1) / 4 + r, -(d - 1) / 4 - r


def region_bounds(d, alpha, s=None):
    """Roots of f(d, ., alpha) in s and, if s is given, of f(d, s, .) in alpha."""
    if d < 2 or not 0 < alpha < 1:
        raise DomainError("region_bounds needs d >= 2 and 0 < alpha < 1")
    ap, am = _alpha_hat(d)
    delta_s = -16 * alpha**2 * (d - 2) + d * (d - 1) ** 2 - 8 * alpha * (d * d - 3 * d + 2)
    centre = d / 4 + 1 - alpha * (d - 2) / (d - 1)
    if delta_s >= 0:
        half = math.sqrt(d) / (4 * (d - 1)) * math.sqrt(delta_s)
        s_lo, s_hi = centre - half, centre + half
    else:
        s_lo = s_hi = math.nan
    roots = (math.nan, math.nan)
    delta_a = math.nan
    if s is not None and d > 2:
        delta_a = d * (d - s) * (s - 1) / (d - 2)
        if delta_a >= 0:
            q = 0.5 * math.sqrt(delta_a)
            roots = (-(s - 1) / 2 + q, -(s - 1) / 2 - q)
    return RegionBounds(d, alpha, ap, am, s_lo, s_hi, d / 2, delta_s, roots, delta_a,
                        math.nan if s is None else float(s))


def f_heuristic(p):
    d, s, a = p.d, p.s, p.alpha
    num = -8 * (d - 2) * a * a - 8 * (d - 2) * a * (s - 1) + 2 * (d - 1) * (s - 1) * (d - 2 * s + 2)
    return num / (d - 1)


def _check_eta_domain(p):
    if not 0 < p.s < p.d / 2:
        raise DomainError(f"need 0 < s < d/2, got s={p.s}, d={p.d}")
    if not p.s + p.alpha > 1:
        raise DomainError(f"need s + alpha > 1 (Gamma(s+alpha-1) pole), got {p.s + p.alpha}")


def big_c(p):
    """Common positive prefactor C_{d,s,alpha} of the asymptotic constants."""
    _check_eta_domain(p)
    d, s, a = p.d, p.s, p.alpha
    lg = (log_gamma(s + a - 1).real + log_gamma((d - 2 * s + 2) / 2).real
          - log_gamma(s).real - log_gamma((d + 2 + 2 * a) / 2).real
          - log_gamma((d + 4 - 2 * s - 2 * a) / 2).real)
    # Gamma(-alpha) < 0 is the only negative factor
    return math.pi ** (d / 2) * math.exp(lg) * (-gamma_real(-a)) / 4


def eta_bracket(p):
    d, s, a = p.d, p.s, p.alpha
    return ((d - 1) * (s + a - 1) * (d + 2 - 2 * s - 2 * a)
            - a * (d - 1) * (d + 2 * a) + 4 * a * (s + a - 1))


def eta_and_c(p):
    c = big_c(p)
    return c * eta_bracket(p), c


def asymptotic_constants(p):
    """(c_tra, c_str, c_mix): prefactors of lambda^(2-2s-2alpha) in the three symbol pieces."""
    c = big_c(p)
    d, s, a = p.d, p.s, p.alpha
    c_tra = -(d - 1) * (s + a - 1) * (d + 2 - 2 * s - 2 * a) * c
    c_str = a * (d + 2 * a) * c
    c_mix = 2 * a * (s + a - 1) * c
    return c_tra, c_str, c_mix


def radial_noise_integral(d, alpha):
    """int_0^inf rho^(d-1) (1+rho^2)^(-(d+2alpha)/2) drho = Gamma(d/2)Gamma(alpha)/(2Gamma(d/2+alpha))."""
    if alpha <= 0:
        raise DivergenceError("radial integral diverges for alpha <= 0")
    return math.exp(log_gamma(d / 2).real + log_gamma(alpha).real
                    - log_gamma(d / 2 + alpha).real) / 2


def _radial_noise_quad(d, alpha):
    f = lambda r: r ** (d - 1) * (1 + r * r) ** (-(d + 2 * alpha) / 2)
    v1, e1 = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13, limit=200)
    # tail in u = 1/r: r^(d-1)(1+r^2)^(-b) dr = u^(2b-d-1) (1+u^2)^(-b) du
    b = (d + 2 * alpha) / 2
    g = lambda u: (1 + u * u) ** (-b)
    v2, e2 = integrate.quad(g, 0, 1, weight="alg", wvar=(2 * b - d - 1, 0),
                            epsabs=0, epsrel=1e-13, limit=200)
    return v1 + v2, e1 + e2


def ito_stratonovich_c0(d, alpha, check=True):
    """Ito-Stratonovich constant (2pi)^(-d/2) (d-1)/d * radial integral.

    With check=True the Beta closed form is compared with adaptive
    quadrature and a mismatch above 1e-9 raises.
    """
    if alpha <= 0:
        raise DivergenceError("c0 diverges for alpha <= 0")
    closed = radial_noise_integral(d, alpha)
    if check:
        q, _ = _radial_noise_quad(d, alpha)
        if abs(q - closed) > 1e-9 * closed:
            raise NonConvergenceError(f"c0 quadrature {q} disagrees with closed form {closed}")
    return (2 * math.pi) ** (-d / 2) * (d - 1) / d * closed


@dataclass(frozen=True)
class ConstantsTable:
    d: int
    s: float
    alpha: float
    eta: float
    big_c: float
    c_tra: float
    c_str: float
    c_mix: float
    f_heuristic: float
    pi1_tilde: float
    pi2_tilde: float
    c0: float
    beta_ratio: float
    gamma_ratio_long: float
    gamma_ratio_norm: float
    bracket_residual: float
    proportionality_residual: float

    def as_dict(self):
        return asdict(self)


def self_similar_table(p):
    """All closed-form scalars for p. eta-related fields are NaN when s+alpha <= 1."""
    d, s, a = p.d, p.s, p.alpha
    if not 0 < s < d / 2:
        raise DomainError(f"need 0 < s < d/2, got s={s}")
    beta_ratio = 1 + 2 * a / (d - 1)
    g_long = (-d + 2 * s) * (-d - 1 + 2 * s)
    g_norm = -d + 2 * s
    pi1 = d - 2 * s + beta_ratio * (4 - 2 * d)
    pi2 = -d + 2 * s + beta_ratio * (d * d + d - 2 * s * d + 2 * s - 4)
    f = f_heuristic(p)
    bracket = (-d - 2 + 2 * s + 2 * a) * pi1 - pi2
    if p.gamma_ok:
        eta, c = eta_and_c(p)
        c_tra, c_str, c_mix = asymptotic_constants(p)
        prop = eta / c - (d - 1) * f / 2
    else:
        eta = c = c_tra = c_str = c_mix = prop = math.nan
    return ConstantsTable(
        d, s, a, eta, c, c_tra, c_str, c_mix, f, pi1, pi2,
        ito_stratonovich_c0(d, a), beta_ratio, g_long, g_norm,
        bracket - f, prop,
    )
