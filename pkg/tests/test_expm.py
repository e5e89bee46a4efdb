import itertools

import numpy as np
import pytest

from graphscm.errors import DimensionError
from graphscm.numcore import Tensor, expm_trace, finite_diff_check

from oracles import has_cycle, taylor_trace_expm

# Tr(e^B) for the 3x3 two-cycle block, frozen from the 30-term Taylor oracle
TWO_CYCLE_TRACE = taylor_trace_expm(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))


def test_zero_matrix_gives_dimension():
    assert expm_trace(Tensor(np.zeros((3, 3)))).item() == pytest.approx(3.0, abs=1e-12)


def test_strictly_upper_triangular_is_nilpotent():
    rng = np.random.default_rng(0)
    a = np.triu(rng.normal(size=(4, 4)) * 3.0, k=1)
    assert expm_trace(Tensor(a)).item() == pytest.approx(4.0, abs=1e-9)


def test_two_cycle_matches_taylor_oracle():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1.0
    assert TWO_CYCLE_TRACE == pytest.approx(np.e + np.exp(-1.0) + 1.0, abs=1e-12)
    assert expm_trace(Tensor(a)).item() == pytest.approx(TWO_CYCLE_TRACE, abs=1e-9)


def test_non_square_rejected():
    with pytest.raises(DimensionError):
        expm_trace(Tensor(np.zeros((2, 3))))


def test_trace_at_least_dimension_all_3x3_binary():
    # equality iff the support has no cycle, per the brute-force oracle
    for bits in itertools.product([0, 1], repeat=9):
        a = np.array(bits, dtype=float).reshape(3, 3)
        value = expm_trace(Tensor(a)).item()
        assert value >= 3.0 - 1e-12
        if has_cycle(a.astype(bool)):
            assert value > 3.0 + 1e-8
        else:
            assert value == pytest.approx(3.0, abs=1e-9)


def test_large_norm_scaling_path_matches_oracle():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(6, 6)) * 2.0  # B = a*a has 1-norm well above 0.5
    expected = taylor_trace_expm(a * a, terms=80)
    assert expm_trace(Tensor(a)).item() == pytest.approx(expected, rel=1e-12)


def test_analytic_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        a = Tensor(rng.normal(size=(5, 5)))
        worst = max(worst, finite_diff_check(expm_trace, a, eps=1e-5))
    assert worst < 1e-4
