"""Reduced radial quadrature of the symbol integrals I_tra, I_str, I_mix and
of the quadratic form v.H(n)v, for n = lam e1 and v = e2.

Each integral is lam^(d+2-2s) times a radial integral
int_0^inf h(lam r) g(r) dr with h(t) = (1+t^2)^(-(d/2+alpha)) and g an
angular kernel; see kernels.py.
"""
from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate

from .constants import ModelParams
from .errors import DivergenceError, DomainError
from .kernels import angular_kernel, angular_integral, transport_kernel
from .results import IntegralResult
from .specfun import gamma_real

TARGETS = ("I_tra", "I_str", "I_mix", "H_quadratic_form", "F_quadratic_form")
SLOW_TAIL = 0.05


@dataclass(frozen=True)
class SymbolRequest:
    params: ModelParams
    lam: float
    target: str = "H_quadratic_form"

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("lambda must be > 0")
        if self.target not in TARGETS:
            raise DomainError(f"unknown target {self.target!r}")


def str_prefactor(d):
    """2 pi^(d/2-1) Gamma(3/2) / Gamma((d+1)/2); equals |S^(d-2)|/(d-1), also for d = 2."""
    return 2 * math.pi ** (d / 2 - 1) * gamma_real(1.5) / gamma_real((d + 1) / 2)


def sphere_area(m):
    """Surface area of the unit sphere S^m in R^(m+1)."""
    return 2 * math.pi ** ((m + 1) / 2) / gamma_real((m + 1) / 2)


def _check_sobolev(p):
    if not 0 < p.s < p.d / 2:
        raise DomainError(f"need 0 < s < d/2, got s={p.s}, d={p.d}")


def _radial(g, lam, tol=1e-10):
    """int_0^inf g(r) dr split at 1/lam, 1, max(2, lam); r = u/(1-u) beyond."""
    cuts = sorted({0.0, min(1.0 / lam, 1.0), 1.0, max(2.0, lam)})
    total = 0.0
    err = 0.0
    nev = 0
    ok = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            v, e, info = integrate.quad(g, a, b, epsabs=0, epsrel=tol, limit=500,
                                        full_output=True)[:3]
            total += v
            err += e
            nev += info["neval"]
            ok = ok and e <= 50 * tol * max(abs(v), 1e-300)

        top = cuts[-1]

        def tail(u):
            if u >= 1:
                return 0.0
            r = u / (1 - u)
            return g(r) / (1 - u) ** 2

        v, e, info = integrate.quad(tail, top / (1 + top), 1.0, epsabs=0, epsrel=tol,
                                    limit=500, full_output=True)[:3]
    total += v
    err += e
    nev += info["neval"]
    ok = ok and e <= 50 * tol * max(abs(total), 1e-300)
    return total, err, nev, ok


def _result(value, err, nev, ok, flag=""):
    if not ok:
        flag = "; ".join(x for x in (flag, "radial quadrature did not reach tolerance") if x)
    return IntegralResult(value, err, "adaptive_quadrature", nev, ok, flag)


def _lorentz(p, lam):
    b = p.d / 2 + p.alpha
    return lambda r: (1 + (lam * r) ** 2) ** (-b)


def i_str(req):
    p, lam = req.params, req.lam
    _check_sobolev(p)
    if not p.s + p.alpha > 1:
        raise DivergenceError("I_str diverges at large |k| unless s + alpha > 1")
    d, s = p.d, p.s
    h = _lorentz(p, lam)
    v, e, n, ok = _radial(lambda r: h(r) * angular_kernel(d + 1, d, s, r), lam)
    c = str_prefactor(d) * lam ** (d + 2 - 2 * s)
    flag = "slow tail decay (s + alpha close to 1)" if p.s + p.alpha - 1 < SLOW_TAIL else ""
    return _result(c * v, c * e, n, ok, flag)


def i_mix(req):
    p, lam = req.params, req.lam
    _check_sobolev(p)
    if not p.s + p.alpha > 0.5:
        raise DivergenceError("I_mix diverges at large |k| unless s + alpha > 1/2")
    d, s = p.d, p.s
    h = _lorentz(p, lam)
    k = 2 * s / (d + 1)
    v, e, n, ok = _radial(lambda r: h(r) * k * angular_kernel(d + 1, d + 2, s + 1, r), lam)
    c = str_prefactor(d) * lam ** (d + 2 - 2 * s)
    flag = "slow tail decay (s + alpha close to 1)" if p.s + p.alpha - 1 < SLOW_TAIL else ""
    return _result(c * v, c * e, n, ok, flag)


def i_tra(req):
    p, lam = req.params, req.lam
    _check_sobolev(p)
    d, s = p.d, p.s
    h = _lorentz(p, lam)
    v, e, n, ok = _radial(lambda r: h(r) * transport_kernel(d, s, r), lam)
    c = sphere_area(d - 2) * lam ** (d + 2 - 2 * s)
    return _result(c * v, c * e, n, ok)


def f_quadratic_form(req):
    """v.F(n)v: the stretching/mixing part plus the uncompensated transport part."""
    p, lam = req.params, req.lam
    _check_sobolev(p)
    d, s = p.d, p.s
    h = _lorentz(p, lam)
    # transport part without the |n|^-2s counterterm
    v, e, n, ok = _radial(lambda r: h(r) * angular_kernel(d - 1, d, s, r), lam)
    c = sphere_area(d - 2) * lam ** (d + 2 - 2 * s)
    tra = _result(c * v, c * e, n, ok)
    return tra + i_str(req).scaled(d - 1) + i_mix(req).scaled(-2)


def h_quadratic_form(req):
    """v.H(n)v = I_tra + (d-1) I_str - 2 I_mix with summed error estimates."""
    d = req.params.d
    return i_tra(req) + i_str(req).scaled(d - 1) + i_mix(req).scaled(-2)


def evaluate(req):
    fn = {"I_tra": i_tra, "I_str": i_str, "I_mix": i_mix,
          "H_quadratic_form": h_quadratic_form, "F_quadratic_form": f_quadratic_form}
    return fn[req.target](req)


def fit_power_law(lams, values):
    """Least-squares fit log|values| = slope*log(lams) + intercept."""
    x = np.log(np.asarray(lams, float))
    y = np.log(np.abs(np.asarray(values, float)))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def fit_rho(p, lams, h_values, eta):
    """Smallest rho with |h + eta lam^(2-2s-2alpha)| <= rho lam^(-2s) on the grid."""
    lams = np.asarray(lams, float)
    h_values = np.asarray(h_values, float)
    resid = np.abs(h_values + eta * lams ** (2 - 2 * p.s - 2 * p.alpha))
    return float(np.max(resid * lams ** (2 * p.s)))
