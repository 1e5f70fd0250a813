import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endoscope.quadratic import (
    L1_quadratic_oracle,
    chi_p,
    class_data,
    factor_discriminant,
    factorize,
    fundamental_discriminant,
    k_p,
    kronecker,
    kronecker_s,
    splitting_type,
)
from endoscope.sarith import SConfig, modified_norm

S2 = SConfig((2,))
S23 = SConfig((2, 3))


def test_kronecker_table_values():
    assert kronecker(5, 2) == -1  # 5 = 5 mod 8
    assert kronecker(5, 11) == 1
    assert kronecker(5, 1) == 1
    assert kronecker(-4, 3) == -1
    assert kronecker(45, 2) == -1
    assert kronecker(12, 2) == 0
    assert kronecker(17, 2) == 1  # 17 = 1 mod 8


@given(
    a=st.integers(-300, 300),
    k1=st.integers(1, 60),
    k2=st.integers(1, 60),
)
def test_kronecker_multiplicative_in_bottom(a, k1, k2):
    assert kronecker(a, k1 * k2) == kronecker(a, k1) * kronecker(a, k2)


@given(a=st.integers(-200, 200), b=st.integers(-200, 200), k=st.integers(1, 50))
def test_kronecker_multiplicative_in_top(a, b, k):
    assert kronecker(a * b, k) == kronecker(a, k) * kronecker(b, k)


@given(d=st.integers(-30, 30), k=st.integers(1, 400), j=st.integers(0, 4))
def test_kronecker_periodicity_for_discriminants(d, k, j):
    D = 4 * d if d % 4 in (2, 3) else d
    if D == 0:
        return
    # (D|.) has period dividing |D| for D = 0, 1 mod 4
    assert kronecker(D, k) == kronecker(D, k + j * abs(D))


def test_kronecker_s_clears_denominators():
    # (5/4 | k) should equal (5 | k) for odd k: the 4 is an even power of 2
    for k in (1, 3, 5, 7, 9, 11):
        assert kronecker_s(Fraction(5, 4), k, S2) == kronecker(5, k)
    # (1/2 | k): cleared to (2 | k)
    assert kronecker_s(Fraction(1, 2), 7, S2) == kronecker(2, 7)
    with pytest.raises(ValueError, match="coprime"):
        kronecker_s(Fraction(5), 6, S2)


def test_factorize_basics():
    assert factorize(600) == {2: 3, 3: 1, 5: 2}
    assert factorize(-97) == {97: 1}
    assert factorize(1) == {}
    big = 10**6 + 3
    assert factorize(big * big * 7) == {7: 1, big: 2}


def test_factor_discriminant_frozen_examples():
    d5 = factor_discriminant(5, S2)
    assert (d5.sigma, d5.fund_D, d5.iota, d5.tau) == (1, 5, 0, 5)
    assert d5.epsilons == (-1,)

    dm4 = factor_discriminant(-4, S2)
    assert (dm4.sigma, dm4.fund_D, dm4.iota) == (1, -4, 1)
    assert dm4.epsilons == (0,)

    d45 = factor_discriminant(45, S2)
    assert (d45.sigma, d45.fund_D) == (3, 5)
    assert d45.k_map[3] == 1
    assert d45.tau == 45  # 3 is not in S here, so sigma_(q) = 1
    assert d45.abs_tau == 45

    d45b = factor_discriminant(45, S23)
    assert d45b.tau == 5
    assert d45b.epsilons == (-1, -1)
    assert d45b.k_map[3] == 1 and d45b.k_map[2] == 0


def test_factor_discriminant_rejects_squares_and_zero():
    for bad in (0, 4, 9, Fraction(1, 4), Fraction(9, 16)):
        with pytest.raises(ValueError):
            factor_discriminant(bad, S2)


@given(
    delta=st.integers(-5000, 5000).filter(
        lambda d: d != 0 and (d < 0 or math.isqrt(d) ** 2 != d)
    ),
    p2=st.integers(-3, 3),
)
@settings(max_examples=300)
def test_factor_discriminant_round_trip(delta, p2):
    x = Fraction(delta) * Fraction(4) ** p2
    data = factor_discriminant(x, S2)
    assert data.sigma > 0
    assert data.sigma**2 * data.fund_D == x
    # |tau| = |delta|_infty * |delta|'_2: the modified total norm relation
    assert data.abs_tau == abs(x) * modified_norm(x, 2)
    sq = Fraction(2) ** data.k_map[2]
    assert x / (sq * sq) == data.tau


def test_splitting_type_frozen():
    assert splitting_type(5, 11) == "split"
    assert splitting_type(5, 3) == "inert"
    assert splitting_type(45, 5) == "ramified"


@given(
    delta=st.integers(-2000, 2000).filter(
        lambda d: d != 0 and (d < 0 or math.isqrt(d) ** 2 != d)
    ),
    p=st.sampled_from([2, 3, 5, 7, 11]),
)
@settings(max_examples=300)
def test_chi_p_matches_fundamental_kronecker(delta, p):
    # chi_p computed from local data agrees with (fund_D | p)
    D = fundamental_discriminant(delta)
    assert chi_p(delta, p) == kronecker(D, p)


@given(
    delta=st.integers(-2000, 2000).filter(lambda d: d % 4 in (0, 1) and d != 0),
    p=st.sampled_from([2, 3, 5, 7]),
)
@settings(max_examples=300)
def test_k_p_closed_form_matches_factorization(delta, p):
    if delta > 0 and math.isqrt(delta) ** 2 == delta:
        return
    data = factor_discriminant(delta, S23 if p in (2, 3) else SConfig((2, p)))
    assert k_p(delta, p) == data.k_map[p]


def test_k_p_two_adic_cases():
    assert k_p(45, 2) == 0
    assert k_p(12, 2) == 0  # 12 = 4*3, unit 3 mod 4 -> (2-2)/2
    assert k_p(16 * 5, 2) == 2  # unit 5 = 1 mod 4
    assert k_p(8, 2) == 0  # odd valuation 3
    assert k_p(32, 2) == 1  # odd valuation 5


def test_class_data_known_values():
    assert class_data(-4) == (1, 4, 0.0)
    assert class_data(-3) == (1, 6, 0.0)
    assert class_data(-23)[0] == 3
    assert class_data(-47)[0] == 5
    h5, w5, reg5 = class_data(5)
    assert h5 == 1 and w5 is None
    assert reg5 == pytest.approx(math.log((1 + math.sqrt(5)) / 2), rel=1e-14)
    h12 = class_data(12)
    assert h12[0] == 1 and h12[2] == pytest.approx(math.log(2 + math.sqrt(3)), rel=1e-14)
    h13 = class_data(13)
    assert h13[2] == pytest.approx(math.log((3 + math.sqrt(13)) / 2), rel=1e-14)
    assert class_data(40)[0] == 2
    # D = 61: fundamental unit (39 + 5 sqrt(61))/2
    assert class_data(61)[2] == pytest.approx(math.log((39 + 5 * math.sqrt(61)) / 2), rel=1e-13)


def test_L1_oracle_frozen_values():
    assert L1_quadratic_oracle(5) == pytest.approx(0.430409, abs=2e-6)
    assert L1_quadratic_oracle(-4) == pytest.approx(math.pi / 4, rel=1e-14)
    assert L1_quadratic_oracle(5, euler_strip=(2,)) == pytest.approx(0.645614, abs=2e-6)
    # imprimitive: L(1,(45|.)) = L(1,chi_5) * (1 - (5|3)/3)
    assert L1_quadratic_oracle(45) == pytest.approx(
        L1_quadratic_oracle(5) * (1 + Fraction(1, 3)), rel=1e-14
    )


def _char_sum_L1(D: int, terms: int = 10**6) -> float:
    """Partial sums of sum (D|k)/k, averaged over one character period."""
    period = abs(D)
    table = np.array([kronecker(D, r) for r in range(period)], dtype=float)
    k = np.arange(1, terms + period, dtype=float)
    vals = table[(np.arange(1, terms + period) % period)] / k
    csum = np.cumsum(vals)
    return float(np.mean(csum[terms - 1 : terms - 1 + period]))


def test_L1_oracle_vs_abel_averaged_character_sums():
    fund = [D for D in range(-50, 51) if D not in (0, 1) and D % 4 in (0, 1)
            and fundamental_discriminant(D) == D]
    assert len(fund) > 25
    for D in fund:
        direct = _char_sum_L1(D)
        oracle = L1_quadratic_oracle(D)
        assert abs(direct - oracle) / abs(oracle) < 1e-5, f"D={D}"
