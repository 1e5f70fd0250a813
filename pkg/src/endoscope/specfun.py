"""Special functions for the analytic side: Gamma/zeta wrappers, K_s(2), the
exponential-pair smoothing function F and its Mellin transform, and the
V-kernels that appear in approximate functional equations.

Conventions.  F(x) = (1/(2 K_0(2))) * int_x^infty e^{-t-1/t} dt/t, so F(0)=1
and F decays like e^{-x}.  Its Mellin transform is F~(s) = K_s(2)/(s K_0(2)),
an odd function with a simple pole of residue 1 at s = 0 and rapid decay in
vertical strips.  The V-kernel of flavor (iota, eps) is the inverse Mellin
integral of F~ against a Gamma-factor ratio and finitely many Euler-type
factors at the ramified places; it is evaluated on a vertical line (default
Re s = 3/2, provably line-independent in the right half plane) by composite
Gauss-Legendre quadrature.

Everything is double precision at the boundary; zeta values come from mpmath
and are cached per node set, so their cost is amortized across kernel tables.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.special import loggamma as _loggamma

__all__ = [
    "KernelFlavor",
    "ContourSpec",
    "gamma",
    "log_gamma",
    "gamma_ratio",
    "zeta",
    "besselK_at2",
    "besselK_at2_series",
    "F",
    "FTable",
    "mellinF",
    "V_kernel",
    "VKernelTable",
    "contour_integral",
    "circle_probe",
    "vertical_nodes",
    "cv_nodes",
    "K0_AT_2",
]


@dataclass(frozen=True)
class KernelFlavor:
    """(iota, eps_1..eps_r, s0): the data selecting a V-kernel.

    iota is 0/1 (sign of the archimedean discriminant coordinate), each
    eps_i is in {-1, 0, +1} (the ramified-place splitting signs), and s0 is
    the expansion point of the underlying functional equation (s0 = 1 for
    the value central to everything here).
    """

    iota: int
    epsilons: tuple[int, ...] = ()
    s0: complex = 1.0

    def __post_init__(self) -> None:
        if self.iota not in (0, 1):
            raise ValueError("iota must be 0 or 1")
        if any(e not in (-1, 0, 1) for e in self.epsilons):
            raise ValueError("epsilons must be -1, 0, or +1")


@dataclass(frozen=True)
class ContourSpec:
    """A quadrature contour: a vertical line or the bent line C_v.

    kind="vertical": Re s = sigma, |Im s| <= t_max.
    kind="cv": straight rays (-i inf, -iv] and [iv, i inf) on the imaginary
    axis joined by the left semicircle |s| = v, Re s <= 0 (radius v must stay
    inside theps zero-free disc of s -> zeta(s+1), e.g. v = 1/4).
    """

    kind: str = "vertical"
    sigma: float = 1.5
    v: float = 0.25
    t_max: float = 40.0
    nodes_per_unit: int = 16

    def __post_init__(self) -> None:
        if self.kind not in ("vertical", "cv"):
            raise ValueError("kind must be 'vertical' or 'cv'")


# ----------------------------------------------------------------------------
# Gamma and zeta
# ----------------------------------------------------------------------------


def gamma(s: complex | np.ndarray) -> complex | np.ndarray:
    import scipy.special

    return scipy.special.gamma(s)


def log_gamma(s: complex | np.ndarray) -> complex | np.ndarray:
    """Branch-continuous log Gamma (scipy's analytic continuation)."""
    return _loggamma(s)


def gamma_ratio(iota: int, s: complex | np.ndarray) -> complex | np.ndarray:
    """Gamma((iota+s)/2) / Gamma((iota+1-s)/2), computed in log space.

    The log-space route keeps the ratio finite far up the critical strip
    where the two factors individually overflow/underflow.
    """
    a = (iota + s) / 2
    b = (iota + 1 - s) / 2
    return np.exp(_loggamma(a) - _loggamma(b))


@functools.lru_cache(maxsize=65536)
def _zeta_cached(s: complex) -> complex:
    return complex(mpmath.zeta(s))


def zeta(s: complex) -> complex:
    """Riemann zeta via mpmath; the pole at s = 1 is signaled, not returned."""
    s = complex(s)
    if s == 1:
        raise ZeroDivisionError("zeta has its pole at s = 1")
    return _zeta_cached(s)


# ----------------------------------------------------------------------------
# K_s(2) by doubly-exponential trapezoid quadrature, plus the series route
# ----------------------------------------------------------------------------

_K_H = 1.0 / 64.0
_K_U = np.arange(0.0, 6.5 + _K_H, _K_H)
_K_WEIGHTS = np.exp(-2.0 * np.cosh(_K_U)) * _K_H
_K_WEIGHTS[0] *= 0.5  # trapezoid endpoint at u = 0


def besselK_at2(s: complex | np.ndarray) -> complex | np.ndarray:
    """K_s(2) = int_0^infty e^{-2 cosh u} cosh(su) du, accurate for |Re s| <= 6.

    The integrand decays doubly exponentially, so a uniform trapezoid grid
    converges faster than any power of the step; h = 1/64 is far below 1e-10.
    Even in s by construction.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    vals = np.cosh(np.multiply.outer(s_arr, _K_U)) @ _K_WEIGHTS
    if np.isscalar(s) or np.asarray(s).ndim == 0:
        return complex(vals[0])
    return vals


K0_AT_2 = float(besselK_at2(0.0).real)


def besselK_at2_series(s: complex, terms: int = 30) -> complex:
    """K_s(2) by the reflection series (pi/(2 sin pi s)) * sum_k [...] / k!.

    The formula has removable singularities at integer s; those are handled
    by a tiny exact-arithmetic-safe offset evaluated at high precision, so
    the result is still good to ~1e-15.
    """
    with mpmath.workdps(40):
        z = mpmath.mpc(s)
        if abs(z - mpmath.nint(z.real)) < 1e-8 and abs(z.imag) < 1e-8:
            z = z + mpmath.mpf("1e-18")
        acc = mpmath.mpc(0)
        fact = mpmath.mpf(1)
        for k in range(terms):
            if k:
                fact *= k
            acc += (1 / mpmath.gamma(k + 1 - z) - 1 / mpmath.gamma(k + 1 + z)) / fact
        val = mpmath.pi / (2 * mpmath.sinpi(z)) * acc
        return complex(val)


# ----------------------------------------------------------------------------
# F and its Mellin transform
# ----------------------------------------------------------------------------


def F(x: float) -> float:
    """The right tail weight F(x) = (1/(2K_0(2))) int_x^infty e^{-t-1/t} dt/t.

    F(0) = 1, strictly decreasing, 0 < F(x) < e^{-x}/(2 K_0(2)).
    """
    if x < 0:
        raise ValueError("F is defined on x >= 0")
    if x == 0.0:
        return 1.0
    lo = math.log(x)
    val, _ = quad(lambda u: math.exp(-2.0 * math.cosh(u)), lo, max(lo + 1.0, 8.0),
                  epsabs=1e-15, epsrel=1e-13, limit=200)
    return val / (2.0 * K0_AT_2)


class FTable:
    """Vectorized F via monotone cubic interpolation of log F on a log-x grid.

    The grid values come from one vectorized Gauss-Legendre panel sweep with a
    suffix sum (each grid point needs the same tail integral as its right
    neighbour plus one short panel), so a dense grid costs milliseconds and
    the interpolation error sits below 1e-9 relative.
    """

    def __init__(self, x_min: float = 1e-8, x_max: float = 90.0, pts_per_decade: int = 600):
        self.x_min, self.x_max = x_min, x_max
        n = int(pts_per_decade * math.log10(x_max / x_min)) + 1
        grid = np.geomspace(x_min, x_max, n)
        u = np.log(grid)
        xg, wg = leggauss(8)
        mid, half = (u[1:] + u[:-1]) / 2, (u[1:] - u[:-1]) / 2
        nodes = mid[:, None] + half[:, None] * xg[None, :]
        panels = (np.exp(-2.0 * np.cosh(nodes)) @ wg) * half
        tail, _ = quad(lambda t: math.exp(-2.0 * math.cosh(t)), u[-1], u[-1] + 8.0,
                       epsabs=1e-300, epsrel=1e-13, limit=200)
        g = np.concatenate([np.cumsum(panels[::-1])[::-1] + tail, [tail]])
        logf = np.log(g / (2.0 * K0_AT_2))
        self._interp = PchipInterpolator(u, logf, extrapolate=False)

    def __call__(self, x: np.ndarray | float) -> np.ndarray | float:
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x_arr)
        tiny = x_arr < self.x_min
        out[tiny] = 1.0  # 1 - F(x) ~ e^{-1/x} is below double precision there
        mid = (~tiny) & (x_arr <= self.x_max)
        out[mid] = np.exp(self._interp(np.log(x_arr[mid])))
        # beyond x_max the contribution is below e^{-90}: drop it
        if np.isscalar(x) or np.asarray(x).ndim == 0:
            return float(out[0])
        return out


def mellinF(s: complex | np.ndarray) -> complex | np.ndarray:
    """F~(s) = K_s(2) / (s K_0(2)): odd, simple pole at 0 with residue 1."""
    if isinstance(s, np.ndarray):
        return besselK_at2(s) / (s.astype(complex) * K0_AT_2)
    return besselK_at2(s) / (complex(s) * K0_AT_2)


# ----------------------------------------------------------------------------
# Contours
# ----------------------------------------------------------------------------


def _panel_nodes(a: float, b: float, nodes_per_unit: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [a, b], ~nodes_per_unit per unit."""
    length = b - a
    n_panels = max(1, int(math.ceil(length)))
    x, w = leggauss(max(4, nodes_per_unit))
    nodes, weights = [], []
    edges = np.linspace(a, b, n_panels + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = (hi + lo) / 2, (hi - lo) / 2
        nodes.append(mid + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def vertical_nodes(spec: ContourSpec) -> tuple[np.ndarray, np.ndarray]:
    """(s_j, ds_j) for the vertical line Re s = sigma, oriented upward."""
    t, wt = _panel_nodes(-spec.t_max, spec.t_max, spec.nodes_per_unit)
    s = spec.sigma + 1j * t
    ds = 1j * wt
    return s, ds


def cv_nodes(spec: ContourSpec) -> tuple[np.ndarray, np.ndarray]:
    """(s_j, ds_j) for the bent contour C_v, oriented from -i inf to +i inf.

    Straight ray up to -iv, left semicircle |s| = v through Re s < 0, then
    the ray from +iv up.
    """
    v, T = spec.v, spec.t_max
    t1, w1 = _panel_nodes(-T, -v, spec.nodes_per_unit)
    s1, ds1 = 1j * t1, 1j * w1
    # phi runs from -pi/2 down to -3pi/2 (left half); flip orientation sign
    phi, wphi = _panel_nodes(-3 * math.pi / 2, -math.pi / 2, 4 * spec.nodes_per_unit)
    s2 = v * np.exp(1j * phi)
    ds2 = -(1j * v * np.exp(1j * phi) * wphi)
    t3, w3 = _panel_nodes(v, T, spec.nodes_per_unit)
    s3, ds3 = 1j * t3, 1j * w3
    return np.concatenate([s1, s2, s3]), np.concatenate([ds1, ds2, ds3])


def contour_integral(f: Callable[[np.ndarray], np.ndarray], spec: ContourSpec) -> complex:
    """int f(s) ds over the contour (plain line integral; no 2*pi*i division)."""
    if spec.kind == "vertical":
        s, ds = vertical_nodes(spec)
    else:
        s, ds = cv_nodes(spec)
    return complex(np.sum(f(s) * ds))


def circle_probe(f: Callable[[complex], complex], center: complex, radius: float,
                 n: int = 512) -> complex:
    """(1/2 pi i) * closed circle integral of f — the residue sum inside.

    Trapezoid on the circle converges spectrally for meromorphic f.
    """
    theta = 2 * math.pi * np.arange(n) / n
    z = center + radius * np.exp(1j * theta)
    vals = np.array([f(complex(zz)) for zz in z], dtype=complex)
    return complex(np.mean(vals * radius * np.exp(1j * theta)))


# ----------------------------------------------------------------------------
# V-kernels
# ----------------------------------------------------------------------------


def _euler_factor_block(flavor: KernelFlavor, places: Sequence[int], s: np.ndarray) -> np.ndarray:
    """prod_i (1 - eps_i q_i^{-s0+s}) / (1 - eps_i q_i^{s0-s-1}) at expansion point s0.

    At s0 = 1 this is the familiar (1 - eps q^{s-1})/(1 - eps q^{-s}).
    """
    s0 = flavor.s0
    out = np.ones_like(s, dtype=complex)
    for eps, q in zip(flavor.epsilons, places):
        if eps == 0:
            continue
        out *= (1 - eps * np.power(float(q), s - s0)) / (1 - eps * np.power(float(q), s0 - s - 1))
    return out


def _v_integrand_coeffs(flavor: KernelFlavor, places: Sequence[int],
                        s: np.ndarray, ds: np.ndarray) -> np.ndarray:
    s0 = flavor.s0
    pref = np.power(math.pi, s0 - 0.5)
    gr = np.exp(_loggamma((flavor.iota + 1 - s0 + s) / 2) - _loggamma((flavor.iota + s0 - s) / 2))
    return pref * mellinF(s) * _euler_factor_block(flavor, places, s) * gr * ds / (2j * math.pi)


def V_kernel(x: float | np.ndarray, flavor: KernelFlavor, places: Sequence[int],
             contour: ContourSpec | None = None) -> float | np.ndarray:
    """The flavor-(iota, eps) smoothing kernel V(x), evaluated directly.

    Default contour: vertical line Re s = 3/2 (any line with Re s in (0, 2)
    clear of the finitely many Euler zeros gives the same value; tested).
    For flavors with s0 = 1 this is real for real x > 0.
    """
    if contour is None:
        contour = ContourSpec(kind="vertical", sigma=1.5)
    s, ds = vertical_nodes(contour)
    c = _v_integrand_coeffs(flavor, places, s, ds)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    lx = np.log(math.pi * x_arr)
    vals = np.exp(-np.multiply.outer(lx, s)) @ c
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(vals[0].real)
    return vals.real


class VKernelTable:
    """Per-flavor V values precomputed on a geometric grid with monotone-cubic
    interpolation in log x; falls back to direct evaluation off the grid.

    The direct route stays available (and tested) — the table is a cache,
    not a replacement.
    """

    def __init__(self, flavor: KernelFlavor, places: Sequence[int],
                 x_min: float = 1e-7, x_max: float = 120.0, pts_per_decade: int = 400,
                 contour: ContourSpec | None = None):
        self.flavor, self.places = flavor, tuple(places)
        self.contour = contour or ContourSpec(kind="vertical", sigma=1.5)
        self.x_min, self.x_max = x_min, x_max
        n = int(pts_per_decade * math.log10(x_max / x_min)) + 1
        self._grid = np.geomspace(x_min, x_max, n)
        vals = V_kernel(self._grid, flavor, places, self.contour)
        self._interp = PchipInterpolator(np.log(self._grid), vals, extrapolate=False)

    def __call__(self, x: np.ndarray | float) -> np.ndarray | float:
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x_arr)
        inside = (x_arr >= self.x_min) & (x_arr <= self.x_max)
        if np.any(inside):
            out[inside] = self._interp(np.log(x_arr[inside]))
        hard = ~inside
        if np.any(hard):
            big = hard & (x_arr > self.x_max)
            out[big] = 0.0  # decay is superpolynomial; beyond 120 it is < 1e-30
            small = hard & (x_arr < self.x_min)
            if np.any(small):
                out[small] = V_kernel(x_arr[small], self.flavor, self.places, self.contour)
        if np.isscalar(x) or np.asarray(x).ndim == 0:
            return float(out[0])
        return out
