import math

import numpy as np
import pytest

from klab.constants import ModelParams
from klab.errors import DomainError
from klab.montecarlo import mc_symbol
from klab.quadrature import SymbolRequest, evaluate

P = ModelParams(3, 1.25, 0.25)
N = 400_000


def z_score(mc, quad):
    return (mc.value - quad.value) / math.hypot(mc.error_estimate, quad.error_estimate)


@pytest.mark.parametrize("target", ["I_str", "I_mix", "I_tra", "H_quadratic_form",
                                    "F_quadratic_form"])
@pytest.mark.parametrize("lam", [1.0, 2.0])
def test_against_quadrature(target, lam):
    r = SymbolRequest(P, lam, target)
    mc = mc_symbol(r, N, seed=3)
    assert mc.method == "monte_carlo" and mc.samples_or_evals == N
    assert abs(z_score(mc, evaluate(r))) < 4


@pytest.mark.parametrize("target", ["I_str", "I_mix", "I_tra"])
def test_d2_against_quadrature(target):
    r = SymbolRequest(ModelParams(2, 0.9, 0.3), 1.0, target)
    assert abs(z_score(mc_symbol(r, N, seed=3), evaluate(r))) < 4


def test_v_independence():
    r = SymbolRequest(P, 2.0)
    a = mc_symbol(r, N, seed=4)
    b = mc_symbol(r, N, seed=5, v=np.array([0.0, 0.6, 0.8]))
    assert abs(a.value - b.value) < 4 * math.hypot(a.error_estimate, b.error_estimate)


def test_one_shot_equals_recombination():
    # H sampled in one pass versus the three pieces sampled separately
    lam = 2.0
    one = mc_symbol(SymbolRequest(P, lam), N, seed=6)
    parts = [mc_symbol(SymbolRequest(P, lam, t), N, seed=7) for t in ("I_tra", "I_str", "I_mix")]
    val = parts[0].value + 2 * parts[1].value - 2 * parts[2].value
    err = math.sqrt(parts[0].error_estimate ** 2 + 4 * parts[1].error_estimate ** 2
                    + 4 * parts[2].error_estimate ** 2 + one.error_estimate ** 2)
    assert abs(one.value - val) < 4 * err


def test_deterministic(monkeypatch):
    r = SymbolRequest(P, 4.0, "I_str")
    a = mc_symbol(r, 50_000, seed=11)
    monkeypatch.setenv("KLAB_THREADS", "3")
    b = mc_symbol(r, 50_000, seed=11)
    assert a.value == b.value and a.error_estimate == b.error_estimate
    assert mc_symbol(r, 50_000, seed=12).value != a.value


def test_validation():
    r = SymbolRequest(P, 1.0)
    with pytest.raises(DomainError):
        mc_symbol(r, 9_999, seed=0)
    with pytest.raises(DomainError):
        mc_symbol(r, N, seed=0, v=np.array([1.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        mc_symbol(r, N, seed=0, n_batches=1)
