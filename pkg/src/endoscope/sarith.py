"""Exact arithmetic over the semilocal ring R × Q_{q_1} × ... × Q_{q_r}.

Everything here is exact: p-adic coordinates are plain `Fraction`s (a rational
determines a point of Q_p for every p, and all the functions we need --
valuations, fractional parts, unitary characters, modified norms -- only ever
look at finitely many digits, so no digit expansions are stored anywhere).
Analytic modules downstream convert to floats at their boundary.

The additive character convention is  e_p(x) = exp(-2*pi*i*<x>_p)  with the
*minus* sign, so that the product character  e_S = e_infty * prod_i e_{q_i}
is trivial on the diagonally embedded ring Z[1/q_1...q_r].
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

__all__ = [
    "InfiniteValuationError",
    "SConfig",
    "SRational",
    "SemilocalPoint",
    "valuation",
    "frac_part",
    "char_e_p",
    "char_e_S",
    "modified_norm",
    "reduce_mod_ZS",
    "is_prime",
]

Rational = Fraction | int


class InfiniteValuationError(ZeroDivisionError):
    """Raised when a p-adic valuation of 0 is requested.

    v_p(0) = +infinity; callers that can live with that should catch this
    rather than receive a float sentinel that would poison exact arithmetic.
    """


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid far beyond anything we feed it."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class SConfig:
    """The set S = {infty, q_1, ..., q_r} plus the Hecke index n.

    finite_places must be strictly increasing primes with q_1 = 2 (the even
    place is always ramified in this setup), and n must be a positive integer
    coprime to every q_i.
    """

    finite_places: tuple[int, ...]
    hecke_n: int = 1

    def __post_init__(self) -> None:
        q = tuple(int(p) for p in self.finite_places)
        object.__setattr__(self, "finite_places", q)
        if not q or q[0] != 2:
            raise ValueError("finite_places must contain 2")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("finite_places must be strictly increasing")
        for p in q:
            if not is_prime(p):
                raise ValueError(f"finite place {p} is not prime")
        n = int(self.hecke_n)
        object.__setattr__(self, "hecke_n", n)
        if n <= 0:
            raise ValueError("hecke_n must be a positive integer")
        if any(n % p == 0 for p in q):
            raise ValueError("hecke_n must be coprime to the finite places")

    @property
    def r(self) -> int:
        return len(self.finite_places)

    def q_power(self, nu: Sequence[int]) -> Fraction:
        """q^nu = prod q_i^{nu_i} for a multi-index nu in Z^r."""
        if len(nu) != self.r:
            raise ValueError("nu must have one entry per finite place")
        out = Fraction(1)
        for p, e in zip(self.finite_places, nu):
            out *= Fraction(p) ** e
        return out

    def is_s_unit_denominator(self, x: Rational) -> bool:
        """True iff x's reduced denominator involves only places of S."""
        d = Fraction(x).denominator
        for p in self.finite_places:
            while d % p == 0:
                d //= p
        return d == 1


@dataclass(frozen=True)
class SRational:
    """A rational whose denominator is supported on the finite places of S.

    These are the entries of the T-lattice Z^S = Z[1/q_1, ..., 1/q_r].
    """

    value: Fraction
    places: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", Fraction(self.value))
        d = self.value.denominator
        for p in self.places:
            while d % p == 0:
                d //= p
        if d != 1:
            raise ValueError(
                f"{self.value} has denominator prime to {self.places}: not an S-integer"
            )

    @classmethod
    def of(cls, x: Rational, cfg: SConfig) -> "SRational":
        return cls(Fraction(x), cfg.finite_places)


@dataclass(frozen=True)
class SemilocalPoint:
    """A point (x_infty; x_1, ..., x_r) of R x Q_{q_1} x ... x Q_{q_r}.

    The real coordinate may be a Fraction when exactness matters (character
    triviality tests); the p-adic coordinates are always exact rationals.
    """

    real_coord: float | Fraction
    padic_coords: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "padic_coords", tuple(Fraction(c) for c in self.padic_coords)
        )

    @classmethod
    def diagonal(cls, x: Rational, cfg: SConfig) -> "SemilocalPoint":
        x = Fraction(x)
        return cls(x, tuple(x for _ in cfg.finite_places))


def valuation(x: Rational, p: int) -> int:
    """v_p(x) for a nonzero rational; raises InfiniteValuationError at 0."""
    x = Fraction(x)
    if x == 0:
        raise InfiniteValuationError(f"v_{p}(0) is infinite")
    v = 0
    n = x.numerator
    while n % p == 0:
        n //= p
        v += 1
    d = x.denominator
    while d % p == 0:
        d //= p
        v -= 1
    return v


def frac_part(x: Rational, p: int) -> Fraction:
    """The p-adic fractional part <x>_p in [0,1) cap Z[1/p] with x - <x>_p in Z_p."""
    x = Fraction(x)
    if x == 0:
        return Fraction(0)
    den = x.denominator
    e = 0
    while den % p == 0:
        den //= p
        e += 1
    if e == 0:
        return Fraction(0)
    pe = p**e
    # x = a / (den * p^e); the class of x in Q_p/Z_p is a * den^{-1} mod p^e.
    c = x.numerator * pow(den, -1, pe) % pe
    return Fraction(c, pe)


def _phase_to_complex(t: Fraction) -> complex:
    """exp(2*pi*i*t) with exact values at the 8th roots of unity."""
    t = t - math.floor(t)
    table = {
        Fraction(0): 1 + 0j,
        Fraction(1, 2): -1 + 0j,
        Fraction(1, 4): 1j,
        Fraction(3, 4): -1j,
    }
    hit = table.get(t)
    if hit is not None:
        return hit
    return cmath.exp(2j * cmath.pi * float(t))


def char_e_p(x: Rational, p: int) -> complex:
    """The unitary character e_p(x) = e(-<x>_p) of Q_p, trivial exactly on Z_p."""
    return _phase_to_complex(-frac_part(x, p))


def char_e_S(point: SemilocalPoint, cfg: SConfig) -> complex:
    """e_S(x) = e(x_infty) * prod_i e_{q_i}(x_i).

    When the real coordinate is exact, the total phase is accumulated as a
    single Fraction before exponentiating, so e_S is *exactly* 1 on the
    diagonal copy of Z^S.
    """
    t = -sum(
        (frac_part(c, p) for c, p in zip(point.padic_coords, cfg.finite_places)),
        start=Fraction(0),
    )
    x0 = point.real_coord
    if isinstance(x0, Fraction) or isinstance(x0, int):
        return _phase_to_complex(Fraction(x0) + t)
    return cmath.exp(2j * cmath.pi * (float(x0) + float(t)))


def modified_norm(y: Rational, p: int) -> Fraction:
    """The square-class-stable norm |y|'_p.

    For odd p it is p^(-2*floor(v/2)); at p = 2 the unit part mod 8 decides:
    odd v -> 2^(-v+3); even v -> 2^(-v) if the unit is 1 mod 4, else 2^(-v+2).
    Satisfies |a^2 y|'_p = |y|'_p for units a, and |y|'_p = p^(-2 k_p(y)) for
    discriminants (see quadratic.k_p).
    """
    y = Fraction(y)
    if y == 0:
        raise InfiniteValuationError("modified norm of 0")
    v = valuation(y, p)
    if p != 2:
        return Fraction(p) ** (-2 * (v // 2))
    if v % 2:
        return Fraction(2) ** (-v + 3)
    unit = y / Fraction(2) ** v
    # unit is a 2-adic unit; its class mod 4 is read off the reduced fraction.
    num, den = unit.numerator, unit.denominator
    u_mod4 = num * pow(den, -1, 8) % 8 % 4
    if u_mod4 == 1:
        return Fraction(2) ** (-v)
    return Fraction(2) ** (-v + 2)


def unit_class(y: Rational, p: int, modulus: int = 8) -> int:
    """The class mod `modulus` of the p-free unit part of y (p odd: mod p ok)."""
    y = Fraction(y)
    v = valuation(y, p)
    u = y / Fraction(p) ** v
    num, den = u.numerator, u.denominator
    return num * pow(den, -1, modulus) % modulus


def reduce_mod_ZS(point: SemilocalPoint, cfg: SConfig) -> tuple[SemilocalPoint, Fraction]:
    """Translate by the diagonal Z^S into [0,1) x Z_{q_1} x ... x Z_{q_r}.

    Returns (reduced point, m) with m in Z^S and point - m*diag = reduced.
    The fundamental domain has volume 1. Exact when the real coordinate is a
    Fraction; float reals are handled with a wrap-around guard.
    """
    t = sum(
        (frac_part(c, p) for c, p in zip(point.padic_coords, cfg.finite_places)),
        start=Fraction(0),
    )
    x0 = point.real_coord
    if isinstance(x0, (Fraction, int)):
        m = t + math.floor(Fraction(x0) - t)
        new_real: float | Fraction = Fraction(x0) - m
    else:
        m = t + math.floor(x0 - float(t))
        new_real = x0 - float(m)
        # float rounding at a cell boundary can land on either side; nudge back.
        while new_real >= 1.0:
            m += 1
            new_real = x0 - float(m)
        while new_real < 0.0:
            m -= 1
            new_real = x0 - float(m)
            if new_real >= 1.0:  # x0 indistinguishable from the boundary
                new_real = 0.0
                m += 1
                break
    coords = tuple(c - m for c in point.padic_coords)
    return SemilocalPoint(new_real, coords), m


def s_integer_samples(cfg: SConfig, count: int, height: int, seed: int = 0) -> Iterable[Fraction]:
    """Deterministic stream of S-integers a / q^e with bounded height (test aid)."""
    import random

    rng = random.Random(seed)
    for _ in range(count):
        den = 1
        for p in cfg.finite_places:
            den *= p ** rng.randrange(0, 5)
        num = rng.randrange(-height, height + 1)
        yield Fraction(num, den)
