"""Kloosterman sums: local factorization, twists, and the Dirichlet series."""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endoscope.kloosterman import (
    D_global,
    D_local_closed,
    KloostermanParams,
    kl_local,
    kl_local_product,
    kl_sum,
)
from endoscope.sarith import SConfig

CFG = SConfig(finite_places=(2,))
CFG23 = SConfig(finite_places=(2, 3))


def test_prime_modulus_frozen():
    # a in {0,1,2}: (-4|3) + (-3|3) + (0|3) = -1 + 0 + 0
    assert kl_sum(KloostermanParams(k=3, f=1), CFG) == -1


def test_trivial_modulus_is_one():
    params = KloostermanParams(k=1, f=1, xi=Fraction(7, 2), m=Fraction(5))
    assert kl_sum(params, CFG) == 1


def test_crt_example_k15():
    left = kl_sum(KloostermanParams(k=15, f=1), CFG)
    assert left == kl_local(3, 1, 0, 1) * kl_local(5, 1, 0, 1) == 1


def test_square_congruence_counts():
    # f=3, k=1: pure root count of a^2 = 4 (mod 9)
    assert kl_sum(KloostermanParams(k=1, f=3), CFG) == 2
    assert kl_sum(KloostermanParams(k=3, f=3), CFG) == 0


def test_twisted_sum_frozen_value():
    # k=5, xi=1/2: symbols (1,-1,0,0,-1), phases through e*e_2 collapse to
    # 1 - 2cos(4 pi/5) = (3+sqrt 5)/2
    val = kl_sum(KloostermanParams(k=5, f=1, xi=Fraction(1, 2)), CFG)
    assert val.real == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-12)
    assert val.imag == pytest.approx(0, abs=1e-12)


def test_enumeration_offset_invariance():
    params = KloostermanParams(k=9, f=1, xi=Fraction(3, 2))
    base = kl_sum(params, CFG)
    for offset in (1, 7, 12345):
        shifted = kl_sum(params, CFG, enumeration_offset=offset)
        assert shifted == pytest.approx(base, abs=1e-12)


def test_twisted_offset_invariance_with_f():
    params = KloostermanParams(k=5, f=3, xi=Fraction(5, 4), m=Fraction(1))
    base = kl_sum(params, CFG)
    assert kl_sum(params, CFG, enumeration_offset=31) == pytest.approx(base, abs=1e-12)


def test_validation():
    with pytest.raises(ValueError):
        KloostermanParams(k=0, f=1)
    with pytest.raises(ValueError):
        kl_sum(KloostermanParams(k=6, f=1), CFG)  # k even
    with pytest.raises(ValueError):
        kl_sum(KloostermanParams(k=5, f=3), CFG23)  # f divisible by 3
    with pytest.raises(ValueError):
        kl_sum(KloostermanParams(k=5, f=1, xi=Fraction(1, 3)), CFG)
    with pytest.raises(ValueError):
        kl_sum(KloostermanParams(k=5, f=1, m=Fraction(1, 5)), CFG)
    with pytest.raises(ValueError):
        kl_sum(KloostermanParams(k=1000003, f=31), CFG)  # window over cap


def test_fractional_m_with_s_denominator():
    # m = 1/4 is a legal S-integer for S = {oo, 2}; 4m = 1.
    val = kl_sum(KloostermanParams(k=7, f=1, m=Fraction(1, 4)), CFG)
    direct = sum((-1, 0, -1, 1, 1, -1, 0))  # (a^2-1 | 7) for a = 0..6
    assert val == direct == -1


def test_kl_local_frozen():
    assert kl_local(3, 0, 0, 1) == 1
    assert kl_local(3, 1, 0, 1) == -1
    assert kl_local(5, 0, 1, 1) == 2  # roots +-2 of a^2 = 4 (mod 25)
    assert kl_local(3, 1, 1, 1) == 0


def test_kl_local_validation():
    with pytest.raises(ValueError):
        kl_local(2, 1, 0, 1)
    with pytest.raises(ValueError):
        kl_local(9, 1, 0, 1)
    with pytest.raises(ValueError):
        kl_local(3, -1, 0, 1)
    with pytest.raises(ValueError):
        kl_local(3, 1, 0, Fraction(1, 3))


@pytest.mark.parametrize("m", [1, -3, 9])
def test_crt_factorization_grid(m):
    for f in (1, 3, 5, 7):
        for k in range(1, 800 // (f * f) + 1, 2):
            got = kl_sum(KloostermanParams(k=k, f=f, m=Fraction(m)), CFG)
            assert got == complex(kl_local_product(k, f, m)), (k, f, m)


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(min_value=0, max_value=30).map(lambda i: 2 * i + 1),
    f=st.sampled_from([1, 3, 5]),
    m=st.integers(min_value=-9, max_value=9).filter(lambda m: m != 0),
    offset=st.integers(min_value=-50, max_value=50),
)
def test_crt_and_offset_property(k, f, m, offset):
    params = KloostermanParams(k=k, f=f, m=Fraction(m))
    base = kl_sum(params, CFG)
    assert base == complex(kl_local_product(k, f, m))
    assert kl_sum(params, CFG, enumeration_offset=offset) == base


def test_D_local_frozen():
    assert D_local_closed(3, 1, 1) == pytest.approx(1.0, abs=1e-15)
    want = (1 - 1 / 27) / (1 - 1 / 81)
    assert D_local_closed(3, 2, 1) == pytest.approx(want, abs=1e-15)
    lifted = want * (1 - 3.0**-4) / (1 - 3.0**-2)
    assert D_local_closed(3, 2, 3) == pytest.approx(lifted, abs=1e-15)
    assert D_local_closed(3, 2, 6) == pytest.approx(lifted, abs=1e-15)


def test_D_local_pole_signaled():
    with pytest.raises(ZeroDivisionError):
        D_local_closed(3, 0, 1)


def test_D_local_matches_truncated_local_sum():
    # Assemble the (u, v) double sum directly from local sums at p = 3.
    p, s = 3, 2.0
    for m in (1, 9):
        acc = 0.0
        for u in range(0, 11):
            for v in range(0, 5):
                if u + 2 * v > 12:
                    continue
                acc += kl_local(p, u, v, m) * p ** (-u * (s + 1) - v * (2 * s + 1))
        assert acc == pytest.approx(D_local_closed(p, s, m).real, rel=1e-8)


def test_D_global_closed_frozen():
    want = float(
        mpmath.zeta(4) / mpmath.zeta(3) * (1 - 2.0**-4) / (1 - 2.0**-3)
    )
    assert D_global(2, 1, CFG).real == pytest.approx(want, rel=1e-12)
    extra = (1 - 3.0**-4) / (1 - 3.0**-2)
    assert D_global(2, 3, CFG).real == pytest.approx(want * extra, rel=1e-12)
    # the m-factor only sees valuations at primes outside S
    assert D_global(2, Fraction(9, 4), CFG) == D_global(2, 9, CFG)
    # for S = {oo, 2, 3} the p=3 factor moves into the place corrections
    s23 = D_global(2, 1, CFG23).real
    corr = (1 - 3.0**-4) / (1 - 3.0**-3)
    assert s23 == pytest.approx(want * corr, rel=1e-12)


def test_D_global_truncated_matches_closed():
    closed = D_global(3, 1, CFG)
    trunc = D_global(3, 1, CFG, ("truncated", 600, 24))
    assert abs(trunc - closed) / abs(closed) < 1e-6

    closed = D_global(3, 3, CFG23)
    trunc = D_global(3, 3, CFG23, ("truncated", 600, 24))
    assert abs(trunc - closed) / abs(closed) < 1e-6


def test_D_global_truncated_s2_tight():
    closed = D_global(2, 1, CFG)
    trunc = D_global(2, 1, CFG, ("truncated", 6000, 48))
    assert abs(trunc - closed) / abs(closed) < 1e-6


def test_D_global_errors():
    with pytest.raises(ZeroDivisionError):
        D_global(0.5, 1, CFG)  # zeta(2s) pole
    with pytest.raises(ValueError):
        D_global(0.9, 1, CFG, ("truncated", 50, 5))
    with pytest.raises(ValueError):
        D_global(2, 0, CFG)
    with pytest.raises(ValueError):
        D_global(2, 1, CFG, "fast")
    with pytest.raises(ValueError):
        D_global(2, Fraction(1, 5), CFG)
