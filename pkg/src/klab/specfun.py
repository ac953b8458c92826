"""Gamma-family special functions.

Lanczos approximation (Godfrey's g = 607/128 coefficient set) with the
reflection formula for the left half-plane.
"""
import cmath
import math

from .errors import DomainError, PoleError

_G = 607 / 128
_COEF = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
_LOG_PI = math.log(math.pi)
POLE_TOL = 1e-14


def _check_pole(z):
    re = z.real
    if re <= 0.5 and abs(z.imag) < POLE_TOL:
        k = round(re)
        if k <= 0 and abs(re - k) < POLE_TOL:
            raise PoleError(f"Gamma has a pole at {k}")


def _lanczos_sum(w):
    acc = _COEF[0]
    for k in range(1, len(_COEF)):
        acc += _COEF[k] / (w + k)
    return acc


def _log_gamma_right(z):
    # valid for Re z >= 1/2
    w = z - 1
    t = w + _G + 0.5
    return _HALF_LOG_2PI + (w + 0.5) * cmath.log(t) - t + cmath.log(_lanczos_sum(w))


def _log_sin_pi_upper(z):
    # analytic branch of log sin(pi z) on Im z >= 0, equal to log(1) at z = 1/2
    return (-1j * math.pi * z + cmath.log(1 - cmath.exp(2j * math.pi * z))
            + 0.5j * math.pi - math.log(2))


def log_gamma(z):
    """Principal branch of log Gamma(z) for complex z.

    On the negative real axis the value is the limit from the upper
    half-plane, so exp(log_gamma(x)) carries the sign of Gamma(x).
    """
    z = complex(z)
    if not (cmath.isfinite(z)):
        raise DomainError("log_gamma needs a finite argument")
    _check_pole(z)
    if z.real >= 0.5:
        return _log_gamma_right(z)
    if z.imag == 0:
        x = z.real
        logsin = math.log(abs(math.sin(math.pi * (x - round(x)))))
        re = _LOG_PI - logsin - _log_gamma_right(complex(1 - x)).real
        return complex(re, -math.pi * math.ceil(-x) if x < 0 else 0.0)
    if z.imag < 0:
        return log_gamma(z.conjugate()).conjugate()
    return _LOG_PI - _log_sin_pi_upper(z) - _log_gamma_right(1 - z)


def _gamma_right(x):
    w = x - 1
    t = w + _G + 0.5
    if x > 140:
        return math.exp(_log_gamma_right(complex(x)).real)
    return math.sqrt(2 * math.pi) * t ** (w + 0.5) * math.exp(-t) * _lanczos_sum(w)


def gamma_real(x):
    """Gamma(x) for real x, negative non-integers included."""
    x = float(x)
    _check_pole(complex(x))
    if x >= 0.5:
        return _gamma_right(x)
    # sin(pi x) via the reduced argument keeps precision near integers
    k = round(x)
    sinpx = math.sin(math.pi * (x - k)) * (-1) ** (k % 2)
    return math.pi / (sinpx * _gamma_right(1 - x))


def gamma_complex(z):
    return cmath.exp(log_gamma(z))


def rgamma_real(x):
    """1/Gamma(x); zero at the poles instead of raising."""
    x = float(x)
    if x <= 0 and abs(x - round(x)) < POLE_TOL:
        return 0.0
    return 1.0 / gamma_real(x)


def beta_angular(gamma_exp, eta_exp):
    """int_0^pi |sin t|^gamma_exp |cos t|^eta_exp dt."""
    if gamma_exp <= -1 or eta_exp <= -1:
        raise DomainError("angular Beta integral needs both exponents > -1")
    g1 = (gamma_exp + 1) / 2
    g2 = (eta_exp + 1) / 2
    lg = log_gamma(g1).real + log_gamma(g2).real - log_gamma(g1 + g2).real
    return math.exp(lg)
