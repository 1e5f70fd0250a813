"""Orbital integrals: closed forms vs the fixed-chain counting oracle."""

from __future__ import annotations

import json
import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endoscope.orbital import (
    ArchSampler,
    GammaClass,
    PadicStepFunction,
    RefinementError,
    SaturationError,
    arch_integral,
    bump_sampler,
    find_representative,
    hecke_volume,
    hnf_count,
    invariant_feasible,
    materialize_theta_q,
    orb_bruteforce,
    orb_iwahori_closed,
    orb_maximal_closed,
    shalika_constants,
    step_integral,
    step_oscillatory_integral,
    theta_inf_integrals,
    theta_p,
    theta_p_limit,
    ThetaData,
)
from endoscope.quadratic import chi_p, k_p
from endoscope.sarith import SConfig


def feasible_grid(primes, ks, ms):
    for p in primes:
        for typ in ("split", "inert", "ramified"):
            for k in ks:
                for m in ms:
                    if invariant_feasible(p, typ, k, m):
                        yield p, typ, k, m


# ---------------------------------------------------------------------------
# closed forms: frozen values
# ---------------------------------------------------------------------------


def test_maximal_closed_frozen_values():
    g = find_representative(3, "split", 0, 0)
    assert orb_maximal_closed(g, 3, 0) == 1
    g = find_representative(3, "split", 2, 0)
    assert orb_maximal_closed(g, 3, 0) == 9
    g = find_representative(3, "inert", 1, 0)
    assert orb_maximal_closed(g, 3, 0) == 5


def test_iwahori_closed_frozen_values():
    assert orb_iwahori_closed(find_representative(3, "split", 1, 0), 3) == Fraction(3, 2)
    assert orb_iwahori_closed(find_representative(3, "inert", 0, 0), 3) == 0
    assert orb_iwahori_closed(find_representative(5, "ramified", 0, 0), 5) == Fraction(1, 6)


def test_non_integral_and_level_mismatch_vanish():
    g = GammaClass(Fraction(1, 3), Fraction(1))
    assert orb_maximal_closed(g, 3, 0) == 0
    assert orb_iwahori_closed(g, 3) == 0
    assert orb_bruteforce(g, 3, ("maximal", 0)) == 0
    g = GammaClass(Fraction(1), Fraction(9))   # v_3(N) = 2
    assert orb_maximal_closed(g, 3, 0) == 0
    assert orb_maximal_closed(g, 3, 1) == 0
    assert orb_iwahori_closed(g, 3) == 0
    assert orb_bruteforce(g, 3, ("iwahori",)) == 0


def test_gamma_class_validation():
    with pytest.raises(ValueError):
        GammaClass(Fraction(2), Fraction(1))   # discriminant zero
    with pytest.raises(ValueError):
        GammaClass(Fraction(1), Fraction(0))


# ---------------------------------------------------------------------------
# the counting oracle
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("p,typ,k,m", list(feasible_grid((3, 5), (0, 1, 2), (0, 1, 2))))
def test_closed_matches_oracle_maximal(p, typ, k, m):
    g = find_representative(p, typ, k, m)
    assert Fraction(orb_maximal_closed(g, p, m)) == orb_bruteforce(g, p, ("maximal", m))


@pytest.mark.parametrize("p,typ,k", [
    (p, typ, k) for p, typ, k, _ in feasible_grid((3, 5), (0, 1, 2), (0,))
])
def test_closed_matches_oracle_iwahori(p, typ, k):
    g = find_representative(p, typ, k, 0)
    assert orb_iwahori_closed(g, p) == orb_bruteforce(g, p, ("iwahori",))


def test_oracle_rejects_short_window():
    g = find_representative(3, "split", 2, 0)
    with pytest.raises(SaturationError):
        orb_bruteforce(g, 3, ("maximal", 0), depth=3)


def test_infeasible_combination_raises():
    assert not invariant_feasible(3, "inert", 0, 1)
    with pytest.raises(ValueError):
        find_representative(3, "inert", 0, 1)


def test_germ_expansion_exact():
    for p in (3, 5):
        for typ in ("split", "inert", "ramified"):
            for k in (0, 1, 2):
                g = find_representative(p, typ, k, 0)
                chi, kk = chi_p(g.delta, p), k_p(g.delta, p)
                for f in (("maximal", 0), ("iwahori",)):
                    l1, l2 = shalika_constants(f, p, 1)
                    rhs = l1 * Fraction(1 - chi, 1 - p) \
                        + l2 * (1 - Fraction(chi, p)) * p ** kk
                    assert orb_bruteforce(g, p, f) == rhs, (p, typ, k, f)


def test_shalika_constants_values():
    assert shalika_constants(("maximal", 0), 3, 1) == (1, Fraction(3, 2))
    assert shalika_constants(("iwahori",), 3, 1) == (1, Fraction(3, 4))
    # central support mismatch: v_p(a^2) != m
    assert shalika_constants(("maximal", 1), 3, 1) == (0, 0)
    assert shalika_constants(("maximal", 2), 3, 3) == (1, Fraction(3, 2))


def test_hecke_volume_against_hnf_enumeration():
    assert hecke_volume(5, 2) == 31
    assert hecke_volume(3, 1) == 4
    for p in (2, 3, 5, 7):
        for m in range(5):
            assert hecke_volume(p, m) == hnf_count(p, m)


# ---------------------------------------------------------------------------
# theta_p
# ---------------------------------------------------------------------------


def test_theta_p_frozen_values():
    g = find_representative(3, "split", 0, 0)
    assert theta_p(g, 3, ("maximal", 0)) == pytest.approx(1.5)
    g = find_representative(3, "inert", 0, 0)
    assert theta_p(g, 3, ("maximal", 0)) == pytest.approx(0.75)
    g = GammaClass(Fraction(1, 3), Fraction(1))
    assert theta_p(g, 3, ("maximal", 0)) == 0.0


def test_theta_p_cauchy_near_singular_locus():
    # N = 1 is a square at 3; approach T = 2 along shrinking balls.
    vals = [
        theta_p(GammaClass(Fraction(2) + Fraction(3) ** j, Fraction(1)), 3, ("maximal", 0))
        for j in (39, 40, 41, 42)
    ]
    assert abs(vals[-1] - vals[-2]) <= 1e-9
    assert abs(vals[-2] - vals[-3]) <= 1e-9
    assert vals[-1] == pytest.approx(theta_p_limit(3, ("maximal", 0)), abs=1e-9)


# ---------------------------------------------------------------------------
# p-adic step functions
# ---------------------------------------------------------------------------


def test_step_integral_unit_ball():
    f = PadicStepFunction(prime=3, pieces=((Fraction(0), 0, 1.0),))
    assert step_integral(f) == 1


def test_step_oscillatory_frozen():
    one_zp = PadicStepFunction(prime=3, pieces=((Fraction(0), 0, 1.0),))
    assert step_oscillatory_integral(one_zp, Fraction(0), Fraction(1)) == 1
    # v(xi/scale) = -1 kills the unit ball ...
    assert step_oscillatory_integral(one_zp, Fraction(1, 3), Fraction(1)) == 0
    # ... but not the radius-1 ball
    one_pzp = PadicStepFunction(prime=3, pieces=((Fraction(0), 1, 1.0),))
    val = step_oscillatory_integral(one_pzp, Fraction(1, 3), Fraction(1))
    assert val == pytest.approx(Fraction(1, 3))


def test_step_oscillatory_phase():
    f = PadicStepFunction(prime=5, pieces=((Fraction(2), 1, 1.0),))
    val = step_oscillatory_integral(f, Fraction(1, 5), Fraction(1))
    expect = complex(mpmath.e ** (-2j * mpmath.pi * Fraction(-2, 5))) / 5
    assert val == pytest.approx(expect)


def test_step_refinement_cap():
    f = PadicStepFunction(prime=3, pieces=((Fraction(0), 0, 1.0),))
    with pytest.raises(RefinementError):
        step_oscillatory_integral(f, Fraction(1, 3 ** 70), Fraction(1), depth_cap=64)


def test_step_disjointness_enforced():
    with pytest.raises(ValueError):
        PadicStepFunction(prime=3, pieces=((Fraction(0), 0, 1.0), (Fraction(3), 1, 2.0)))


def test_step_json_round_trip():
    f = PadicStepFunction(prime=2, pieces=(
        (Fraction(1, 2), 1, complex(0.5, -0.25)), (Fraction(0), 2, 1.0)))
    g = PadicStepFunction.from_json(f.to_json())
    assert g == f
    schema = json.loads(f.to_json())
    assert set(schema) == {"prime", "pieces"}
    assert set(schema["pieces"][0]) == {"center", "radius_exp", "re", "im"}


@given(st.lists(
    st.tuples(st.integers(0, 80), st.integers(1, 4),
              st.floats(-4, 4, allow_nan=False)),
    min_size=1, max_size=5))
@settings(max_examples=60, deadline=None)
def test_step_integral_is_volume_weighted_sum(raw):
    # distinct centers mod 3^e by spreading them out at scale 3^5
    pieces = []
    for i, (c, e, v) in enumerate(raw):
        pieces.append((Fraction(c * 3 ** 5 + i), 5 + e, complex(v)))
    f = PadicStepFunction(prime=3, pieces=tuple(pieces))
    expected = sum(v * 3.0 ** -(e) for _, e, v in f.pieces)
    assert step_integral(f) == pytest.approx(expected, rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------------------
# archimedean samplers
# ---------------------------------------------------------------------------


def _mp_bump(center, width):
    def fn(x):
        u = (x - center) / width
        if abs(u) >= 1:
            return mpmath.mpf(0)
        return mpmath.e ** (1 - 1 / (1 - u * u))
    return fn


def test_bump_plain_matches_high_precision_quadrature():
    b = bump_sampler(2.5, 0.4)
    val, err = arch_integral(b, +1, "plain")
    ref = mpmath.quad(_mp_bump(2.5, 0.4), [mpmath.mpf("2.1"), mpmath.mpf("2.9")])
    assert err <= 1e-9
    assert val == pytest.approx(float(ref), abs=1e-9)


def test_oscillatory_at_zero_frequency_is_plain():
    b = bump_sampler(1.1, 1.05)
    plain, _ = arch_integral(b, +1, "plain")
    osc, _ = arch_integral(b, +1, "oscillatory", omega=0.0)
    assert osc == plain


def test_oscillatory_against_direct_quadrature():
    b = bump_sampler(0.8, 0.9)
    val, err = arch_integral(b, -1, "oscillatory", omega=1.3)
    w = 2 * mpmath.pi * mpmath.mpf("1.3")
    fn = _mp_bump(0.8, 0.9)
    re = mpmath.quad(lambda x: fn(x) * mpmath.cos(w * x), [-0.1, 1.7])
    im = mpmath.quad(lambda x: fn(x) * mpmath.sin(w * x), [-0.1, 1.7])
    assert val == pytest.approx(complex(float(re), -float(im)), abs=1e-9)


def test_inv_sqrt_weight_with_endpoint_singularity():
    # support [0.05, 2.15] straddles x = 1: substitution side
    b = bump_sampler(1.1, 1.05)
    val, err = arch_integral(b, +1, "inv_sqrt")
    fn = _mp_bump(1.1, 1.05)
    ref = mpmath.quad(lambda x: fn(x) / mpmath.sqrt(x * x - 1), [1, mpmath.mpf("2.15")])
    assert err <= 1e-9
    assert val == pytest.approx(float(ref), abs=1e-9)


def test_inv_sqrt_weight_minus_sign_has_no_singularity():
    b = bump_sampler(0.8, 0.9)
    val, _ = arch_integral(b, -1, "inv_sqrt")
    fn = _mp_bump(0.8, 0.9)
    ref = mpmath.quad(lambda x: fn(x) / mpmath.sqrt(x * x + 1), [-0.1, 1.7])
    assert val == pytest.approx(float(ref), abs=1e-9)


def test_inv_sqrt_plus_sign_outside_indicator_region():
    # a bump fully inside (-1, 1): x^2 - 1 > 0 never holds
    b = bump_sampler(0.0, 0.5)
    val, _ = arch_integral(b, +1, "inv_sqrt")
    assert val == 0.0


def test_bump_sampler_metadata():
    assert bump_sampler(2.5, 0.4).vanishes_near_pm1
    assert not bump_sampler(1.1, 1.05).vanishes_near_pm1
    b = bump_sampler(1.1, 1.05)
    assert b(5.0) == 0.0 and b(1.1) == pytest.approx(1.0)


def test_theta_inf_integrals_both_signs():
    theta = ThetaData(
        theta_inf_plus=bump_sampler(1.1, 1.05),
        theta_inf_minus=bump_sampler(0.8, 0.9),
        theta_q={},
        nu_bound=1,
    )
    out = theta_inf_integrals(theta, "plain")
    assert set(out) == {+1, -1}
    ref_p, _ = arch_integral(theta.theta_inf_plus, +1, "plain")
    ref_m, _ = arch_integral(theta.theta_inf_minus, -1, "plain")
    assert out[+1] == ref_p and out[-1] == ref_m


# ---------------------------------------------------------------------------
# materialization
# ---------------------------------------------------------------------------


def test_materialize_matches_direct_evaluation():
    cfg = SConfig(finite_places=(2,), hecke_n=1)
    sf, err = materialize_theta_q(cfg, 0, +1, (0,), ("maximal", 0), depth_cap=24)
    assert err <= 1e-6
    for t in (0, 1, 3, 5, 8, -7, 11):
        direct = theta_p(GammaClass(Fraction(t), Fraction(1)), 2, ("maximal", 0))
        assert sf.evaluate(Fraction(t)) == pytest.approx(direct)


def test_materialize_singular_ball_gets_limit_value():
    cfg = SConfig(finite_places=(2,), hecke_n=1)
    sf, err = materialize_theta_q(cfg, 0, +1, (0,), ("maximal", 0), depth_cap=24)
    assert err > 0.0   # T = +-2 hit the singular locus
    assert sf.evaluate(Fraction(2)) == pytest.approx(theta_p_limit(2, ("maximal", 0)))


def test_materialize_nonsquare_side_is_exact():
    cfg = SConfig(finite_places=(2,), hecke_n=1)
    sf, err = materialize_theta_q(cfg, 0, -1, (0,), ("maximal", 0), depth_cap=24)
    assert err == 0.0   # T^2 + 4 never vanishes on Z_2
    for t in (0, 1, 2, 3, 6):
        direct = theta_p(GammaClass(Fraction(t), Fraction(-1)), 2, ("maximal", 0))
        assert sf.evaluate(Fraction(t)) == pytest.approx(direct)


def test_materialize_level_mismatch_is_zero():
    cfg = SConfig(finite_places=(2,), hecke_n=1)
    # nu = (1,) makes v_2(N) = 1 but the function wants level 0
    sf, err = materialize_theta_q(cfg, 0, +1, (1,), ("maximal", 0))
    assert sf.pieces == () and err == 0.0
    assert step_integral(sf) == 0


def test_materialize_iwahori_flavor():
    cfg = SConfig(finite_places=(2, 3), hecke_n=1)
    sf, err = materialize_theta_q(cfg, 1, +1, (0, 0), ("iwahori",), depth_cap=18)
    for t in (1, 3, 5):
        direct = theta_p(GammaClass(Fraction(t), Fraction(1)), 3, ("iwahori",))
        assert sf.evaluate(Fraction(t)) == pytest.approx(direct)
