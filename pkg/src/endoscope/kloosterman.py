"""Generalized Kloosterman sums away from the fixed places, and their series.

The sums here attach to a pair of odd moduli ``(k, f)`` prime to the
configured finite places, a twist ``xi``, and a determinant parameter ``m``.
``f`` imposes the square congruence a^2 = 4m (mod f^2); ``k`` carries a
quadratic symbol in the shifted variable; twisting is by the product of the
real character e and the q-adic characters e_q.  Everything factors over
primes (a Chinese-remainder identity, tested exhaustively), and the
generating Dirichlet series has a closed Euler-product form whose truncated
tail is also computed literally for cross-validation.

The quadratic symbols are evaluated exactly; only the final complex
exponentials pass through double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

from .quadratic import factorize, kronecker_s
from .sarith import (
    SConfig,
    SemilocalPoint,
    SRational,
    char_e_S,
    is_prime,
    valuation,
)
from .specfun import zeta

Rational = Union[int, Fraction]

__all__ = [
    "KloostermanParams",
    "kl_sum",
    "kl_local",
    "kl_local_product",
    "D_local_closed",
    "D_global",
]

#: Hard cap on the enumeration length k*f^2 of a single sum.  Desk scale:
#: everything in the test battery sits far below this, and the direct loop
#: is the point (no multiplicative shortcuts inside kl_sum itself).
ENUMERATION_CAP = 10**6

_POLE_EPS = 1e-12


# ----------------------------------------------------------------------------
# Quadratic-symbol lookup tables.  (d|k) for odd k > 0 is periodic in d with
# period k, so a single int8 row per modulus turns the inner loop of every
# enumeration into vectorized table lookups.  Rows are built multiplicatively:
# (d|p^e) is (d|p) for odd e and the unit indicator for even e.
# ----------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _legendre_row(p: int) -> np.ndarray:
    row = np.full(p, -1, dtype=np.int8)
    squares = np.arange(1, p, dtype=np.int64) ** 2 % p
    row[squares] = 1
    row[0] = 0
    row.setflags(write=False)
    return row


@lru_cache(maxsize=None)
def _symbol_row(k: int) -> np.ndarray:
    """Kronecker symbols (d|k) for d in range(k); k odd and positive."""
    if k <= 0 or k % 2 == 0:
        raise ValueError(f"symbol rows require odd positive modulus, got {k}")
    if k == 1:
        row = np.ones(1, dtype=np.int8)
    else:
        row = np.ones(k, dtype=np.int8)
        d = np.arange(k, dtype=np.int64)
        for p, e in factorize(k).items():
            if e % 2:
                row = row * _legendre_row(p)[d % p]
            else:
                row = row * (d % p != 0).astype(np.int8)
    row.setflags(write=False)
    return row


@lru_cache(maxsize=None)
def _sqrt_classes(modulus: int, target: int) -> tuple[int, ...]:
    """All residues a mod ``modulus`` with a^2 = target (mod modulus)."""
    return tuple(a for a in range(modulus) if (a * a - target) % modulus == 0)


@lru_cache(maxsize=None)
def _kl_untwisted(k: int, f: int, c: int) -> int:
    """Sum of ((a^2-c)/f^2 | k) over a mod k*f^2 with a^2 = c (mod f^2).

    Integer c plays the role of 4m.  This is the xi = 0 kernel shared by
    the full sum and the truncated Dirichlet series.
    """
    f2 = f * f
    row = _symbol_row(k)
    total = 0
    for a0 in _sqrt_classes(f2, c % f2):
        a = a0 + f2 * np.arange(k, dtype=np.int64)
        d = (a * a - c) // f2
        total += int(row[d % k].sum(dtype=np.int64))
    return total


# ----------------------------------------------------------------------------
# Parameters and the global sum.
# ----------------------------------------------------------------------------


def _as_fraction(x: Rational | SRational) -> Fraction:
    if isinstance(x, SRational):
        return x.value
    return Fraction(x)


@dataclass(frozen=True)
class KloostermanParams:
    """Moduli and twist data for one generalized Kloosterman sum.

    ``k`` and ``f`` must be positive and coprime to the finite places of
    the configuration they are used with; ``xi`` and ``m`` must lie in the
    corresponding ring of S-integers (denominators supported on the fixed
    places only).  Those config-dependent checks happen in :func:`kl_sum`.
    """

    k: int
    f: int
    xi: Fraction = field(default=Fraction(0))
    m: Fraction = field(default=Fraction(1))

    def __post_init__(self) -> None:
        if not isinstance(self.k, int) or not isinstance(self.f, int):
            raise TypeError("moduli k and f must be integers")
        if self.k < 1 or self.f < 1:
            raise ValueError(f"moduli must be positive, got k={self.k}, f={self.f}")
        object.__setattr__(self, "xi", _as_fraction(self.xi))
        object.__setattr__(self, "m", _as_fraction(self.m))

    @property
    def modulus(self) -> int:
        """Length k*f^2 of the enumeration window."""
        return self.k * self.f * self.f


def _validate(params: KloostermanParams, cfg: SConfig) -> None:
    for q in cfg.finite_places:
        if params.k % q == 0 or params.f % q == 0:
            raise ValueError(
                f"moduli must be coprime to the finite places; {q} divides k*f"
            )
    for name, x in (("xi", params.xi), ("m", params.m)):
        if not cfg.is_s_unit_denominator(x):
            raise ValueError(f"{name}={x} is not an S-integer for places {cfg.finite_places}")


def kl_sum(
    params: KloostermanParams, cfg: SConfig, *, enumeration_offset: int = 0
) -> complex:
    """The generalized Kloosterman sum Kl_{k,f}(xi, m).

    Enumerates a over a window of k*f^2 consecutive integers, keeps those
    with a^2 = 4m (mod f^2), and accumulates

        ((a^2 - 4m)/f^2 | k) * e(a xi / kf^2) * prod_q e_q(a xi / kf^2).

    The symbol is exact; the phase factors are accumulated as one exact
    rational angle per term before a single complex exponential.  The value
    does not depend on ``enumeration_offset`` (each summand has period
    k*f^2 in a), which the test suite exercises directly.
    """
    _validate(params, cfg)
    window = params.modulus
    if window > ENUMERATION_CAP:
        raise ValueError(
            f"enumeration window k*f^2 = {window} exceeds cap {ENUMERATION_CAP}"
        )
    m4 = 4 * params.m
    if params.xi == 0 and enumeration_offset == 0 and m4.denominator == 1:
        return complex(_kl_untwisted(params.k, params.f, int(m4)))

    f2 = params.f * params.f
    num, den = m4.numerator, m4.denominator  # den is a unit at every p | f
    total = 0 + 0j
    for a in range(enumeration_offset, enumeration_offset + window):
        if (den * a * a - num) % f2:
            continue
        sym = kronecker_s((Fraction(a * a) - m4) / f2, params.k, cfg)
        if sym == 0:
            continue
        if params.xi == 0:
            total += sym
        else:
            x = Fraction(a) * params.xi / window
            total += sym * char_e_S(SemilocalPoint.diagonal(x, cfg), cfg)
    return total


# ----------------------------------------------------------------------------
# Local sums and the Chinese-remainder product.
# ----------------------------------------------------------------------------


def kl_local(p: int, u: int, v: int, m: Rational) -> int:
    """Local generalized Kloosterman sum at an odd prime p outside S.

    Counts a mod p^(u+2v) subject to a^2 = 4m (mod p^2v), each weighted by
    the symbol ((a^2-4m)/p^2v | p^u).  A rational m is admitted as long as
    it is p-integral; its (S-supported) denominator is a unit mod p and is
    folded into the symbol in the standard way.
    """
    if p == 2 or not is_prime(p):
        raise ValueError(f"local sums need an odd prime outside S, got p={p}")
    if u < 0 or v < 0:
        raise ValueError("valuation exponents must be nonnegative")
    m4 = 4 * Fraction(m)
    num, den = m4.numerator, m4.denominator
    if den % p == 0:
        raise ValueError(f"m={m} is not p-integral at p={p}")
    mod = p ** (u + 2 * v)
    if mod > ENUMERATION_CAP:
        raise ValueError(f"enumeration window p^(u+2v) = {mod} exceeds cap")
    p2v = p ** (2 * v)
    a = np.arange(mod, dtype=np.int64)
    t = den * a * a - num
    keep = t % p2v == 0
    if u == 0:
        return int(keep.sum(dtype=np.int64))
    # ((t/(den p^2v)) | p^u) = ((t/p^2v) * den | p^u): a denominator coprime
    # to the modulus moves to the numerator at the cost of a square.
    row = _symbol_row(p**u)
    d = (t[keep] // p2v) * den
    return int(row[d % p**u].sum(dtype=np.int64))


def kl_local_product(k: int, f: int, m: Rational) -> int:
    """Product of kl_local(p, v_p(k), v_p(f), m) over the primes dividing k*f.

    By the Chinese remainder theorem this equals the untwisted global sum
    Kl_{k,f}(0, m); the identity is verified exhaustively in the tests
    rather than assumed anywhere in the code.
    """
    fac_k = factorize(k) if k > 1 else {}
    fac_f = factorize(f) if f > 1 else {}
    total = 1
    for p in sorted(set(fac_k) | set(fac_f)):
        total *= kl_local(p, fac_k.get(p, 0), fac_f.get(p, 0), m)
        if total == 0:
            break
    return total


# ----------------------------------------------------------------------------
# The Dirichlet series D(s, m) = sum_{k,f} Kl_{k,f}(0,m) k^(-s-1) f^(-2s-1).
# ----------------------------------------------------------------------------


def D_local_closed(p: int, s: complex, m: Rational = 1) -> complex:
    """Euler factor at an odd prime p outside S of the Kloosterman series.

    (1 - p^(-s-1)) / (1 - p^(-2s)), times the divisor-sum factor
    sum_{j <= v_p(m)} p^(-js) when p divides m.  The divisor factor is
    summed directly, so s = 0 is only a problem for the leading factor
    (a genuine pole where p^(2s) = 1).
    """
    if p == 2 or not is_prime(p):
        raise ValueError(f"Euler factors need an odd prime outside S, got p={p}")
    x = p ** (-s)
    den = 1 - x * x
    if abs(den) < _POLE_EPS:
        raise ZeroDivisionError(f"Euler factor at p={p} has a pole where p^(2s) = 1")
    val = (1 - x / p) / den
    vm = valuation(Fraction(m), p)
    if vm < 0:
        raise ValueError(f"m={m} is not p-integral at p={p}")
    if vm > 0:
        val = val * sum(x**j for j in range(vm + 1))
    return complex(val)


def _closed_product(s: complex, m: Fraction, cfg: SConfig) -> complex:
    num = zeta(2 * s)  # raises ZeroDivisionError on the pole at s = 1/2
    den = zeta(s + 1)  # ... and at s = 0
    if abs(den) < _POLE_EPS:
        raise ZeroDivisionError("zeta(s+1) vanishes: pole of the closed product")
    val = complex(num) / complex(den)
    for q in cfg.finite_places:
        x = q ** (-complex(s))
        d = 1 - x / q
        if abs(d) < _POLE_EPS:
            raise ZeroDivisionError(f"place-{q} correction has a pole at this s")
        val = val * (1 - x * x) / d
    for p, e in factorize(m.numerator).items():
        if p in cfg.finite_places:
            continue
        x = p ** (-complex(s))
        val = val * sum(x**j for j in range(e + 1))
    return val


def _truncated_sum(s: complex, m: Fraction, cfg: SConfig, U: int, V: int) -> complex:
    if complex(s).real <= 1:
        raise ValueError("the truncated series converges only for Re s > 1")
    m4 = 4 * m
    total = 0 + 0j
    for f in range(1, V + 1):
        if any(f % q == 0 for q in cfg.finite_places):
            continue
        wf = f ** (-(2 * complex(s) + 1))
        for k in range(1, U + 1):
            if any(k % q == 0 for q in cfg.finite_places):
                continue
            if m4.denominator == 1:
                kl = _kl_untwisted(k, f, int(m4))
            else:
                kl = kl_sum(KloostermanParams(k=k, f=f, m=m), cfg).real
            if kl:
                total += kl * k ** (-(complex(s) + 1)) * wf
    return total


def D_global(
    s: complex,
    m: Rational | SRational,
    cfg: SConfig,
    route: str | tuple = "closed",
) -> complex:
    """The Kloosterman Dirichlet series, by closed product or literal sum.

    route="closed":
        zeta(2s)/zeta(s+1) * prod_q (1-q^(-2s))/(1-q^(-s-1))
        * prod_{p | m, p outside S} sum_{j <= v_p(m)} p^(-js),
      valid at any s away from the (signaled) poles.
    route=("truncated", U, V):
        sum over S-coprime k <= U, f <= V of Kl_{k,f}(0, m) k^(-s-1) f^(-2s-1),
      requiring Re s > 1.  The loop order is fixed (f outer, k inner,
      both ascending), so the reduction is deterministic.
    """
    m = _as_fraction(m)
    if m == 0:
        raise ValueError("the series needs a nonzero determinant parameter m")
    if not cfg.is_s_unit_denominator(m):
        raise ValueError(f"m={m} is not an S-integer for places {cfg.finite_places}")
    if route == "closed":
        return _closed_product(s, m, cfg)
    if isinstance(route, tuple) and len(route) == 3 and route[0] == "truncated":
        _, U, V = route
        return _truncated_sum(s, m, cfg, int(U), int(V))
    raise ValueError(f"unknown route {route!r}; use 'closed' or ('truncated', U, V)")
