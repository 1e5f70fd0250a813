"""Special-function layer: anchors, dual routes, contour plumbing."""

from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endoscope.specfun import (
    F,
    FTable,
    ContourSpec,
    KernelFlavor,
    K0_AT_2,
    V_kernel,
    VKernelTable,
    besselK_at2,
    besselK_at2_series,
    circle_probe,
    contour_integral,
    cv_nodes,
    gamma,
    gamma_ratio,
    mellinF,
    vertical_nodes,
    zeta,
)


# ---------------------------------------------------------------- gamma/zeta


def test_gamma_anchors():
    assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma(5.0) == pytest.approx(24.0, rel=1e-14)
    # |Gamma(1+i)|^2 = pi / sinh(pi)
    g = gamma(1 + 1j)
    assert abs(g) ** 2 == pytest.approx(math.pi / math.sinh(math.pi), rel=1e-13)


def test_gamma_ratio_matches_direct_quotient():
    for s in (0.3, 1.5 + 2j, 0.5 + 10j, 2.0 - 7j):
        direct = gamma((1 + s) / 2) / gamma((1 + 1 - s) / 2)
        assert gamma_ratio(1, s) == pytest.approx(direct, rel=1e-12)


def test_gamma_modulus_stirling_regime():
    # |Gamma(sigma+it)| ~ sqrt(2 pi) |t|^{sigma-1/2} e^{-pi |t| / 2}
    for t in (30.0, 50.0):
        sigma = 1.5
        approx = math.sqrt(2 * math.pi) * t ** (sigma - 0.5) * math.exp(-math.pi * t / 2)
        exact = abs(complex(mpmath.gamma(mpmath.mpc(sigma, t))))
        assert abs(gamma_ratio(0, complex(sigma, t))) > 0  # finite in log space
        assert exact == pytest.approx(approx, rel=0.05)


def test_zeta_anchors_and_pole():
    assert zeta(0) == pytest.approx(-0.5, abs=1e-14)
    assert zeta(2) == pytest.approx(math.pi ** 2 / 6, rel=1e-14)
    assert zeta(1.5) == pytest.approx(2.6123753486854883, rel=1e-13)
    with pytest.raises(ZeroDivisionError):
        zeta(1)


def test_zeta_agrees_with_scipy_on_real_axis():
    from scipy.special import zeta as scipy_zeta

    for s in (1.5, 2.0, 3.0, 4.5, 7.0):
        assert zeta(s).real == pytest.approx(float(scipy_zeta(s)), rel=1e-12)


# ---------------------------------------------------------------- K_s(2)


def test_K0_at_2_value():
    assert K0_AT_2 == pytest.approx(0.11389387274953343, rel=1e-12)


def test_besselK_quadrature_vs_mpmath():
    for s in (0.0, 0.5, 1.0, 2.5, 3.0, 1.0 + 4.0j, 0.5 + 12.0j):
        ref = complex(mpmath.besselk(mpmath.mpc(s), 2))
        assert complex(besselK_at2(s)) == pytest.approx(ref, rel=1e-11)


def test_besselK_quadrature_vs_series_grid():
    # two fully independent evaluation routes, including integer s
    pts = [0.0, 0.25, 0.5, 1.0, 1.75, 2.0, 3.0, -1.5,
           0.5 + 1j, 1.5 - 2j, 2 + 0.5j, -0.5 + 3j]
    pts += [complex(x, y) for x in (0.1, 1.3) for y in (0.7, 5.0)]
    for s in pts:
        a = complex(besselK_at2(s))
        b = besselK_at2_series(s)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


@given(st.floats(-4, 4), st.floats(-8, 8))
@settings(max_examples=40, deadline=None)
def test_besselK_even_in_s(x, y):
    s = complex(x, y)
    assert complex(besselK_at2(s)) == pytest.approx(complex(besselK_at2(-s)), rel=1e-12, abs=1e-15)


# ---------------------------------------------------------------- F and F~


def test_F_at_zero_and_bounds():
    assert F(0.0) == 1.0
    for x in (0.1, 0.5, 1.0, 3.0, 10.0):
        val = F(x)
        assert 0.0 < val < math.exp(-x) / (2 * K0_AT_2)
    assert F(0.5) > F(1.0) > F(2.0)


def test_F_table_matches_direct():
    table = FTable()
    xs = np.geomspace(1e-6, 60.0, 40)
    direct = np.array([F(float(x)) for x in xs])
    got = table(xs)
    assert np.allclose(got, direct, rtol=1e-8, atol=1e-14)
    assert table(1e-12) == 1.0
    assert table(500.0) == 0.0


def test_mellinF_residue_at_zero_is_one():
    probe = circle_probe(lambda s: mellinF(s), 0.0, 0.1)
    assert probe.real == pytest.approx(1.0, abs=1e-8)
    assert probe.imag == pytest.approx(0.0, abs=1e-10)


def test_mellinF_is_odd():
    rng = np.random.default_rng(7)
    for _ in range(10):
        s = complex(rng.uniform(-3, 3), rng.uniform(-6, 6))
        if abs(s) < 0.3:
            continue
        assert complex(mellinF(s)) == pytest.approx(-complex(mellinF(-s)), rel=1e-10, abs=1e-14)


def test_mellin_inversion_recovers_F():
    # (1/2 pi i) int_(2) F~(s) x^{-s} ds = F(x)
    x = 0.5
    spec = ContourSpec(kind="vertical", sigma=2.0)
    val = contour_integral(lambda s: mellinF(s) * np.exp(-s * math.log(x)), spec) / (2j * math.pi)
    assert val.real == pytest.approx(F(x), abs=1e-9)
    assert val.imag == pytest.approx(0.0, abs=1e-10)


def test_zeta_ratio_residue_probe():
    # residue at s = -1/2 of zeta(2s+2)/zeta(s+2) is 1/(2 zeta(3/2))
    val = circle_probe(lambda s: zeta(2 * s + 2) / zeta(s + 2), -0.5, 0.1, n=256)
    assert val.real == pytest.approx(1.0 / (2 * zeta(1.5).real), abs=1e-8)


# ---------------------------------------------------------------- contours


def test_cv_contour_differs_from_line_by_residue():
    # moving from C_v to Re s = 3/2 crosses only the pole of F~ at 0
    x = 0.7

    def f(s):
        return mellinF(s) * np.exp(-s * math.log(x))

    line = contour_integral(f, ContourSpec(kind="vertical", sigma=1.5))
    bent = contour_integral(f, ContourSpec(kind="cv", v=0.25))
    assert (line - bent) / (2j * math.pi) == pytest.approx(1.0, abs=1e-8)


def test_cv_nodes_sit_on_the_contour():
    s, _ = cv_nodes(ContourSpec(kind="cv", v=0.25))
    on_axis = np.abs(s.real) < 1e-13
    on_arc = np.abs(np.abs(s) - 0.25) < 1e-13
    assert np.all(on_axis | on_arc)
    assert np.all(s.real <= 1e-13)  # the arc bulges left, never right


def test_vertical_nodes_weights_integrate_polynomial():
    spec = ContourSpec(kind="vertical", sigma=1.0, t_max=3.0)
    s, ds = vertical_nodes(spec)
    # int over the segment of s^2 ds has the closed form [(s^3)/3]
    top, bot = 1 + 3j, 1 - 3j
    assert np.sum(s ** 2 * ds) == pytest.approx((top ** 3 - bot ** 3) / 3, rel=1e-12)


# ---------------------------------------------------------------- V-kernels


def test_V_line_independence():
    flavor = KernelFlavor(iota=0, epsilons=(-1,))
    for x in (0.5, 2.0, 10.0):
        vals = [V_kernel(x, flavor, (2,), ContourSpec(sigma=sig)) for sig in (1.5, 2.0, 2.5)]
        assert vals[0] == pytest.approx(vals[1], abs=1e-8)
        assert vals[1] == pytest.approx(vals[2], abs=1e-8)


def test_V_far_decay():
    for flavor in (KernelFlavor(0, (1,)), KernelFlavor(1, (-1,))):
        assert abs(V_kernel(1000.0, flavor, (2,))) <= 1e-6


def test_V_zero_eps_drops_euler_factor():
    x = 1.7
    a = V_kernel(x, KernelFlavor(iota=1, epsilons=(0,)), (2,))
    b = V_kernel(x, KernelFlavor(iota=1, epsilons=()), ())
    assert a == pytest.approx(b, rel=1e-13)


def test_V_table_matches_direct():
    flavor = KernelFlavor(iota=0, epsilons=(1, -1))
    table = VKernelTable(flavor, (2, 3), x_min=1e-4, x_max=50.0)
    xs = np.geomspace(2e-4, 40.0, 25)
    direct = V_kernel(xs, flavor, (2, 3))
    assert np.allclose(table(xs), direct, rtol=1e-6, atol=1e-9)


def test_flavor_validation():
    with pytest.raises(ValueError):
        KernelFlavor(iota=2)
    with pytest.raises(ValueError):
        KernelFlavor(iota=0, epsilons=(3,))
    with pytest.raises(ValueError):
        ContourSpec(kind="banana")
