"""Angular kernels f_{a,b,s}(r) = r^a int_0^pi sin^b t (1 - 2r cos t + r^2)^(-s) dt."""
from functools import lru_cache
import math

import numpy as np

from .errors import DivergenceError
from .specfun import beta_angular

_NODES = 20


@lru_cache(maxsize=8)
def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _graded(lo, hi, depth, toward_lo=True, ratio=0.5):
    """Breakpoints on [lo, hi] shrinking geometrically towards one end."""
    L = hi - lo
    k = max(1, int(math.ceil(math.log(depth / L) / math.log(ratio))))
    g = L * ratio ** np.arange(k + 1)
    pts = lo + g if toward_lo else hi - g
    pts = np.append(pts, lo if toward_lo else hi)
    return np.sort(pts)


def _panel_rule(edges, n):
    x, w = _gauss(n)
    a = edges[:-1, None]
    h = (edges[1:] - edges[:-1])[:, None] / 2
    nodes = (a + h * (x + 1)).ravel()
    weights = (h * w).ravel()
    return nodes, weights


@lru_cache(maxsize=4096)
def _theta_rule(width_key, n):
    # width_key: depth of the grading towards theta = 0 (depends on |1-r|)
    depth0 = 10.0 ** width_key
    left = _graded(0.0, math.pi / 2, depth0, toward_lo=True)
    right = _graded(math.pi / 2, math.pi, 1e-4, toward_lo=False)
    edges = np.concatenate([left, right[1:]])
    # the two end slivers are handled analytically
    nodes, weights = _panel_rule(edges[1:-1], n)
    return nodes, weights, edges[1], math.pi - edges[-2]


def _rule_for(r, n):
    w = abs(1 - r)
    if w == 0:
        key = -14
    else:
        key = max(-14, min(-3, int(math.floor(math.log10(w))) - 3))
    return _theta_rule(key, n)


def _q(r, theta):
    # 1 - 2 r cos t + r^2 without cancellation near r = 1, t = 0
    return (1 - r) ** 2 + 4 * r * np.sin(theta / 2) ** 2


def _sliver_lo(b, s, r, delta):
    # int_0^delta t^b ((1-r)^2 + r t^2)^(-s) dt to leading order in delta
    c2 = (1 - r) ** 2
    if r == 0:
        return delta ** (b + 1) / (b + 1)
    if c2 == 0:
        return delta ** (b - 2 * s + 1) / (b - 2 * s + 1) * r ** (-s)
    return delta ** (b + 1) / (b + 1) * (c2 + r * delta * delta / 3) ** (-s)


def _sliver_hi(b, s, r, delta):
    return delta ** (b + 1) / (b + 1) * (1 + r) ** (-2 * s)


def _check(b, s):
    if not b > 2 * s - 1:
        raise DivergenceError(f"angular integral diverges at r = 1: need b > 2s - 1 (b={b}, s={s})")


def _angular(b, s, r, n, subtract_one=False):
    nodes, weights, dlo, dhi = _rule_for(r, n)
    sb = np.sin(nodes) ** b
    if subtract_one:
        # fused (q^-s - 1), stable for small r
        u = r * r - 2 * r * np.cos(nodes)
        lq = np.where(np.abs(u) < 0.5, np.log1p(u), np.log(_q(r, nodes)))
        vals = sb * np.expm1(-s * lq)
        lo = _sliver_lo(b, s, r, dlo) - dlo ** (b + 1) / (b + 1)
        hi = _sliver_hi(b, s, r, dhi) - dhi ** (b + 1) / (b + 1)
    else:
        vals = sb * _q(r, nodes) ** (-s)
        lo = _sliver_lo(b, s, r, dlo)
        hi = _sliver_hi(b, s, r, dhi)
    return float(weights @ vals) + lo + hi


def angular_integral(b, s, r, subtract_one=False, with_error=False):
    """int_0^pi sin^b t [(1 - 2r cos t + r^2)^(-s) (- 1)] dt."""
    _check(b, s)
    r = float(r)
    v = _angular(b, s, r, _NODES, subtract_one)
    if not with_error:
        return v
    err = abs(v - _angular(b, s, r, _NODES // 2, subtract_one))
    return v, err


def angular_kernel(a, b, s, r, with_error=False):
    """f_{a,b,s}(r) = r^a int_0^pi sin^b t (1 - 2r cos t + r^2)^(-s) dt."""
    if r < 0:
        raise ValueError("angular_kernel needs r >= 0")
    _check(b, s)
    if r == 0:
        if a > 0:
            return (0.0, 0.0) if with_error else 0.0
        if a == 0:
            v = beta_angular(b, 0)
            return (v, 0.0) if with_error else v
        raise DivergenceError("f_{a,b,s}(0) is infinite for a < 0")
    if with_error:
        v, e = angular_integral(b, s, r, with_error=True)
        return r ** a * v, r ** a * e
    return r ** a * angular_integral(b, s, r)


def transport_kernel(d, s, r):
    """r^(d-1) int_0^pi sin^d t [(1 - 2r cos t + r^2)^(-s) - 1] dt."""
    if r == 0:
        return 0.0
    return r ** (d - 1) * angular_integral(d, s, r, subtract_one=True)
