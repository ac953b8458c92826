"""Importance-sampled Monte Carlo of the symbol integrals over R^d.

The integrals are taken straight from their d-dimensional definitions
(n = lam e1, v a unit vector orthogonal to n), so this module shares no
reduction with quadrature.py.

Proposal: equal mixture of two radially symmetric densities, one centred
at k = 0 and one at k = n.  Each has radius rho = scale*sqrt(X) with
X ~ BetaPrime(a, c); a sets the behaviour at the centre, c the tail
|k|^(-d-2c).
"""
from concurrent.futures import ThreadPoolExecutor
import math
import os

import numpy as np

from .errors import DomainError
from .results import IntegralResult
from .specfun import log_gamma

_CHUNK = 1 << 17


def _threads():
    try:
        return max(1, int(os.environ.get("KLAB_THREADS", "1")))
    except ValueError:
        return 1


def _log_sphere(d):
    return math.log(2) + (d / 2) * math.log(math.pi) - log_gamma(d / 2).real


class _RadialProposal:
    def __init__(self, d, centre, scale, sing, tail):
        self.d = d
        self.centre = np.asarray(centre, float)
        self.scale = float(scale)
        # density ~ |x|^(-sing) at the centre, |x|^(-d-2 tail) far away
        self.a = (d - sing) / 2
        self.c = tail
        self.lognorm = (log_gamma(self.a).real + log_gamma(self.c).real
                        - log_gamma(self.a + self.c).real + _log_sphere(d))

    def sample(self, rng, n):
        g1 = rng.standard_gamma(self.a, n)
        g2 = rng.standard_gamma(self.c, n)
        rho = self.scale * np.sqrt(g1 / g2)
        u = rng.standard_normal((n, self.d))
        u /= np.linalg.norm(u, axis=1)[:, None]
        return self.centre + rho[:, None] * u

    def logpdf(self, k):
        rho = np.linalg.norm(k - self.centre, axis=1)
        x = (rho / self.scale) ** 2
        # p(rho) = 2 rho / scale^2 * f_X(x); q = p / (|S^(d-1)| rho^(d-1))
        return (math.log(2) - 2 * math.log(self.scale) + (self.a - 1) * np.log(x)
                - (self.a + self.c) * np.log1p(x) - (self.d - 2) * np.log(rho)
                - self.lognorm)


def _integrand(target, p, lam, v, k):
    d, s, al = p.d, p.s, p.alpha
    kp = -k.copy()
    kp[:, 0] += lam  # noise wavevector n - k
    kp2 = np.einsum("ij,ij->i", kp, kp)
    k2 = np.einsum("ij,ij->i", k, k)
    w = (1 + kp2) ** (-(d + 2 * al) / 2)
    ks = k2 ** (-s)
    vk = k @ v
    # P_perp(kp) k = P_perp(kp) n, better conditioned near k = n
    coef = lam * kp[:, 0] / kp2
    pk = -coef[:, None] * kp
    pk[:, 0] += lam
    pk2 = np.einsum("ij,ij->i", pk, pk)
    vpk = pk @ v
    if target == "I_str":
        return w * ks * vk * vk
    if target == "I_mix":
        return w * ks * vpk * vk
    tra = w * (ks - lam ** (-2 * s)) * pk2
    if target == "I_tra":
        return tra
    rest = w * ks * ((d - 1) * vk * vk - 2 * vpk * vk)
    if target == "H_quadratic_form":
        return tra + rest
    if target == "F_quadratic_form":
        return w * ks * pk2 + rest
    raise DomainError(f"unknown target {target!r}")


def _proposals(p, lam):
    d, s, al = p.d, p.s, p.alpha
    tail = min(al, s + al - 1) if s + al > 1 else al
    sing = max(0.0, 2 * s - 2)
    n = np.zeros(d)
    n[0] = lam
    return (_RadialProposal(d, np.zeros(d), max(1.0, lam / 2), sing, tail),
            _RadialProposal(d, n, 1.0, 0.0, tail))


def _batch(req, v, n, seed, b):
    rng = np.random.default_rng([seed, b])
    q0, q1 = _proposals(req.params, req.lam)
    total = 0.0
    total2 = 0.0
    left = n
    while left > 0:
        m = min(_CHUNK, left)
        pick = rng.random(m) < 0.5
        k = np.empty((m, req.params.d))
        n0 = int(pick.sum())
        k[pick] = q0.sample(rng, n0)
        k[~pick] = q1.sample(rng, m - n0)
        lq = np.logaddexp(q0.logpdf(k), q1.logpdf(k)) + math.log(0.5)
        y = _integrand(req.target, req.params, req.lam, v, k) * np.exp(-lq)
        y = np.where(np.isfinite(y), y, 0.0)
        total += y.sum()
        total2 += (y * y).sum()
        left -= m
    mean = total / n
    var = max(total2 / n - mean * mean, 0.0)
    return mean, var


def mc_symbol(req, n_samples, seed, v=None, n_batches=16):
    """Monte Carlo estimate of req.target at n = lam e1.

    The sample budget is split over n_batches independent streams
    (seed, b); the error estimate is the standard error of the batch
    means. A batch mean more than 5 sigma from the rest sets a
    variance-explosion flag.
    """
    if n_samples < 10_000:
        raise DomainError("mc_symbol needs at least 1e4 samples")
    if n_batches < 2:
        raise DomainError("need at least two batches for an error estimate")
    d = req.params.d
    if v is None:
        v = np.zeros(d)
        v[1] = 1.0
    v = np.asarray(v, float)
    if abs(np.linalg.norm(v) - 1) > 1e-12 or abs(v[0]) > 1e-12:
        raise DomainError("v must be a unit vector orthogonal to n = lam e1")
    per = [n_samples // n_batches + (1 if b < n_samples % n_batches else 0)
           for b in range(n_batches)]
    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        out = list(ex.map(lambda b: _batch(req, v, per[b], seed, b), range(n_batches)))
    means = np.array([m for m, _ in out])
    wvar = np.array([s2 for _, s2 in out])
    counts = np.array(per, float)
    est = float(np.sum(means * counts) / counts.sum())
    se = float(np.std(means, ddof=1) / math.sqrt(n_batches))
    flag = ""
    within = np.sqrt(wvar / counts)
    for b in range(n_batches):
        others = (est * counts.sum() - means[b] * counts[b]) / (counts.sum() - counts[b])
        if abs(means[b] - others) > 5 * math.sqrt(within[b] ** 2 + se ** 2):
            flag = "variance explosion: batch means disagree beyond 5 sigma"
            break
    return IntegralResult(est, se, "monte_carlo", int(n_samples), not flag, flag)
