"""Mellin transforms of the two kernel families and the Parseval residue expansion.

Families:
  lorentzian  h(t) = (1 + t^2)^(-b)
      M[h, z] = Gamma(z/2) Gamma(b - z/2) / (2 Gamma(b)),     strip (0, 2b)
  angular     f(t) = t^a int_0^pi sin^b u (1 - 2t cos u + t^2)^(-s) du
      M[f, z] = sqrt(pi) Gamma((b-2s+2)/2) Gamma((b+1)/2) / (2 Gamma(s))
                * Gamma((2s-z-a)/2) Gamma((z+a)/2)
                / (Gamma((b-a-z+2)/2) Gamma((b+a-2s+2+z)/2)),  strip (-a, 2s-a)

An angular form built with subtract=True stands for f minus its
leading small-t term t^a * int sin^b; its transform is the same
meromorphic function, continued to the strip (-a-2, -a).
"""
from dataclasses import dataclass, field
import cmath
import math

from scipy import integrate

from .errors import DomainError, PoleError
from .kernels import angular_kernel, angular_integral
from .results import IntegralResult
from .specfun import gamma_real, log_gamma

_POLE_MERGE = 1e-9


@dataclass(frozen=True)
class ResidueTerm:
    location: float
    coefficient: float
    power_of_lambda: float

    def value(self, lam):
        return self.coefficient * lam ** self.power_of_lambda


@dataclass(frozen=True)
class MellinClosedForm:
    kind: str
    parameters: dict = field(hash=False)
    fundamental_strip: tuple

    @classmethod
    def lorentzian(cls, b):
        if not b > 0:
            raise DomainError("lorentzian family needs b > 0")
        return cls("lorentzian", {"b": float(b)}, (0.0, 2.0 * b))

    @classmethod
    def angular(cls, a, b, s, subtract=False):
        if not (b > 0 and s > 0):
            raise DomainError("angular family needs b > 0, s > 0")
        params = {"a": float(a), "b": float(b), "s": float(s)}
        if subtract:
            params["subtract"] = 1.0
            strip = (-a - 2.0, 0.0 - a)
        else:
            strip = (0.0 - a, 2.0 * s - a)
        return cls("angular", params, strip)

    # Gamma-factor representation: const * prod Gamma(p z + q) / prod Gamma(p z + q)
    def _factors(self):
        p = self.parameters
        if self.kind == "lorentzian":
            b = p["b"]
            return 1 / (2 * gamma_real(b)), [(0.5, 0.0), (-0.5, b)], []
        a, b, s = p["a"], p["b"], p["s"]
        const = (math.sqrt(math.pi) * gamma_real((b - 2 * s + 2) / 2)
                 * gamma_real((b + 1) / 2) / (2 * gamma_real(s)))
        num = [(-0.5, (2 * s - a) / 2), (0.5, a / 2)]
        den = [(-0.5, (b - a + 2) / 2), (0.5, (b + a - 2 * s + 2) / 2)]
        return const, num, den

    def __call__(self, z):
        z = complex(z)
        const, num, den = self._factors()
        lg = 0j
        for pf, qf in den:
            w = pf * z + qf
            if abs(w.imag) < 1e-14 and w.real <= 0 and abs(w.real - round(w.real)) < 1e-14:
                return 0j
            lg -= log_gamma(w)
        for pf, qf in num:
            lg += log_gamma(pf * z + qf)
        return const * cmath.exp(lg)

    def function(self, t):
        p = self.parameters
        if self.kind == "lorentzian":
            return (1 + t * t) ** (-p["b"])
        a, b, s = p["a"], p["b"], p["s"]
        if p.get("subtract"):
            if t == 0:
                return 0.0
            return t ** a * angular_integral(b, s, t, subtract_one=True)
        return angular_kernel(a, b, s, t)

    def _pole_candidates(self, lo, hi):
        _, num, den = self._factors()
        found = []
        for pf, qf in num:
            m = 0
            while True:
                z0 = (-m - qf) / pf
                if pf > 0 and z0 < lo or pf < 0 and z0 > hi:
                    break
                if lo < z0 < hi:
                    found.append(z0)
                m += 1
                if m > 100000:
                    break
        found.sort()
        merged = []
        for z0 in found:
            if not merged or abs(z0 - merged[-1]) > _POLE_MERGE:
                merged.append(z0)
        return merged

    def _laurent_parts(self, z0):
        """Return (order, leading coefficient) of the transform at z0."""
        const, num, den = self._factors()
        order = 0
        coef = complex(const)
        for pf, qf in num:
            w = pf * z0 + qf
            m = round(w)
            if m <= 0 and abs(w - m) < _POLE_MERGE:
                order += 1
                coef *= (-1) ** (-m) / (math.factorial(-m) * pf)
            else:
                coef *= cmath.exp(log_gamma(w))
        for pf, qf in den:
            w = pf * z0 + qf
            m = round(w)
            if m <= 0 and abs(w - m) < _POLE_MERGE:
                order -= 1
                coef *= (-1) ** (-m) * math.factorial(-m) * pf
            else:
                coef /= cmath.exp(log_gamma(w))
        return order, coef

    def poles(self, lo, hi):
        """Real poles in (lo, hi) as (location, order) pairs."""
        out = []
        for z0 in self._pole_candidates(lo, hi):
            order, _ = self._laurent_parts(z0)
            if order > 0:
                out.append((z0, order))
        return out

    def residue(self, z0):
        order, coef = self._laurent_parts(z0)
        if order <= 0:
            return 0.0
        if order > 1:
            raise PoleError(f"pole of order {order} at {z0}; only simple poles are supported")
        return coef.real


def mellin_lorentzian(b, z):
    return MellinClosedForm.lorentzian(b)(z)


def mellin_angular(a, b, s, z):
    return MellinClosedForm.angular(a, b, s)(z)


def numeric_mellin(f, z, strip_hint, tol=1e-11):
    """int_0^inf t^(z-1) f(t) dt by adaptive quadrature.

    f is a scalar callable or a MellinClosedForm. [0, 1] is integrated
    directly; [1, inf) through t = u/(1-u), u in [1/2, 1). Each half gets
    half the tolerance.
    """
    if isinstance(f, MellinClosedForm):
        f = f.function
    z = complex(z)
    lo, hi = strip_hint
    if not lo < z.real < hi:
        raise DomainError(f"Re z = {z.real} outside the strip {strip_hint}")

    def near(t):
        if t == 0:
            return 0j
        return t ** (z - 1) * f(t)

    def far(u):
        if u >= 1:
            return 0j
        t = u / (1 - u)
        return t ** (z - 1) * f(t) / (1 - u) ** 2

    value = 0j
    err = 0.0
    nev = 0
    ok = True
    half = tol / 2
    for g, a, b in ((near, 0.0, 1.0), (far, 0.5, 1.0)):
        parts = [lambda x: g(x).real]
        if z.imag != 0:
            parts.append(lambda x: g(x).imag)
        for k, part in enumerate(parts):
            v, e, info = integrate.quad(part, a, b, epsabs=half, epsrel=half, limit=500,
                                        full_output=True)[:3]
            nev += info["neval"]
            value += v if k == 0 else 1j * v
            err += e
            if e > max(half, half * abs(v)) * 100:
                ok = False
    out = value if z.imag != 0 else value.real
    return IntegralResult(out, err, "adaptive_quadrature", nev, ok,
                          "" if ok else "numeric Mellin did not reach tolerance")


def _contains(strip, x):
    return strip[0] < x < strip[1]


def parseval_expand(h, f, lam, strip, n_terms=None):
    """Residue expansion of int_0^inf h(lam t) f(t) dt.

    strip = (r, r_prime). If r_prime is None it is placed midway between
    the n_terms-th and next pole to the right of r (n_terms defaults to 1).
    Returns (terms, remainder exponent -r_prime); the integral equals
    sum(term.value(lam)) + O(lam^-r_prime).
    """
    r, rp = strip
    if not (_contains(h.fundamental_strip, r) and _contains(f.fundamental_strip, 1 - r)):
        raise DomainError(f"r = {r} must lie in the strip of M[h, z] and of M[f, 1-z]")
    if not lam > 1:
        raise DomainError("parseval_expand needs lambda > 1")
    horizon = r + 50.0
    cand = sorted(set(
        [z0 for z0, _ in h.poles(r, horizon)]
        + [1 - w0 for w0, _ in f.poles(1 - horizon, 1 - r)]
    ))
    merged = []
    for z0 in cand:
        if not merged or abs(z0 - merged[-1]) > _POLE_MERGE:
            merged.append(z0)
    if rp is None:
        k = n_terms or 1
        if len(merged) < k + 1:
            raise DomainError("not enough poles to place the contour")
        rp = (merged[k - 1] + merged[k]) / 2
    if rp <= r:
        raise DomainError("need r_prime > r")
    for z0 in merged:
        if abs(z0 - rp) < 1e-9:
            raise PoleError(f"contour Re z = {rp} passes through the pole {z0}")
    terms = []
    for z0 in merged:
        if not r < z0 < rp:
            continue
        oh, _ = h._laurent_parts(z0)
        of, _ = f._laurent_parts(1 - z0)
        if oh > 0 and of > 0:
            raise PoleError(f"coincident poles at z = {z0} (logarithmic term) are not supported")
        if oh > 0:
            c = -h.residue(z0) * f(1 - z0).real
        elif of > 0:
            # d/dz of (1 - z) flips the sign of the residue
            c = f.residue(1 - z0) * h(z0).real
        else:
            continue
        terms.append(ResidueTerm(z0, c, -z0))
    return terms, -rp


def contour_remainder(h, f, lam, r_prime, y_max=None, tol=1e-12):
    """(1/2 pi i) int over Re z = r_prime of M[h, z] M[f, 1-z] lam^-z dz."""
    llam = math.log(lam)

    def g(y):
        z = complex(r_prime, y)
        return (h(z) * f(1 - z) * cmath.exp(-z * llam)).real

    if y_max is None:
        y_max = 80.0
    v, e = integrate.quad(g, 0, y_max, epsabs=tol, epsrel=tol, limit=1000)[:2]
    return v / math.pi, e / math.pi


def direct_parseval_integral(h, f, lam, breaks=(1.0,), tol=1e-12):
    """int_0^inf h(lam t) f(t) dt by adaptive quadrature (reference value)."""
    hf = h.function
    ff = f.function
    g = lambda t: hf(lam * t) * ff(t)
    pts = sorted({1.0 / lam, *breaks})
    edges = [0.0, *pts]
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(g, a, b, epsabs=0, epsrel=tol, limit=400)[:2]
        total += v
        err += e
    top = edges[-1]

    def tail(u):
        if u <= 0:
            return 0.0
        t = top / u
        return g(t) * top / (u * u)

    v, e = integrate.quad(tail, 0, 1, epsabs=0, epsrel=tol, limit=400)[:2]
    return total + v, err + e
