"""Quadratic discriminants: factorization, local symbols, and the L(1) oracle.

The oracle computes L(1, (D'|.)) through the class number formula with h, w,
and the fundamental unit obtained by exhaustive reduced-form counting and
continued fractions.  It deliberately shares no code with the L-series in
`zagier`, which is the whole point: the series under test are checked against
an independent finite computation.

Discriminant bookkeeping: a nonsquare delta in Z^S factors as
delta = sigma^2 * D with D fundamental and sigma > 0 rational with
S-supported denominator.  Splitting off sigma's q-part gives the integer
tau = delta / sigma_(q)^2, whose absolute value is also the modified total
norm |delta|'_{infty,q} used by functional equations downstream.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2

from .sarith import SConfig, SRational, valuation

__all__ = [
    "DiscriminantData",
    "kronecker",
    "kronecker_s",
    "factor_discriminant",
    "splitting_type",
    "chi_p",
    "k_p",
    "is_square_in_Qp",
    "L1_quadratic_oracle",
    "fundamental_discriminant",
    "class_data",
    "factorize",
]

Rational = Fraction | int


def kronecker(D: int, k: int) -> int:
    """Full Kronecker symbol (D|k), including the (.|2) and (.|-1) rules."""
    return int(gmpy2.kronecker(D, k))


def kronecker_s(D: Rational, k: int, cfg: SConfig) -> int:
    """(D|k) for an S-rational top argument and S-coprime k.

    The S-denominator is cleared by even powers of the q_i, which cannot
    change the symbol because squares coprime to k drop out.
    """
    D = Fraction(D)
    if any(k % p == 0 for p in cfg.finite_places):
        raise ValueError(f"k={k} must be coprime to the finite places {cfg.finite_places}")
    den = D.denominator
    mult = 1
    for p in cfg.finite_places:
        v = 0
        while den % p == 0:
            den //= p
            v += 1
        mult *= p ** (2 * ((v + 1) // 2))
    if den != 1:
        raise ValueError(f"{D} is not an S-rational for places {cfg.finite_places}")
    return kronecker(int(D * mult), k)


# ----------------------------------------------------------------------------
# Integer factorization: trial division then Brent's rho.  Inputs here are
# discriminant-sized, so this is comfortable headroom rather than necessity.
# ----------------------------------------------------------------------------

_TRIAL_BOUND = 10**6


def _brent_rho(n: int) -> int:
    if n % 2 == 0:
        return 2
    import random

    rng = random.Random(n)
    while True:
        y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
        g = r = q = 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g


def factorize(n: int) -> dict[int, int]:
    """Prime factorization of |n| (n != 0) as {p: multiplicity}."""
    n = abs(int(n))
    if n == 0:
        raise ValueError("cannot factor 0")
    out: dict[int, int] = {}
    for p in (2, 3, 5):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    d = 7
    wheel = (4, 2, 4, 2, 4, 6, 2, 6)
    i = 0
    while d * d <= n and d < _TRIAL_BOUND:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += wheel[i]
        i = (i + 1) % 8
    if n > 1:
        stack = [n]
        while stack:
            m = stack.pop()
            if m == 1:
                continue
            if gmpy2.is_prime(m):
                out[m] = out.get(m, 0) + 1
                continue
            if gmpy2.is_square(m):
                r = int(gmpy2.isqrt(m))
                stack.extend([r, r])
                continue
            g = _brent_rho(m)
            stack.extend([g, m // g])
    return out


def _squarefree_part(x: Fraction) -> int:
    """The squarefree integer in the square class of the nonzero rational x."""
    n = x.numerator * x.denominator  # same square class as x
    sign = -1 if n < 0 else 1
    out = sign
    for p, e in factorize(n).items():
        if e % 2:
            out *= p
    return out


def fundamental_discriminant(delta: Rational) -> int:
    """The fundamental discriminant in the square class of delta (delta nonsquare)."""
    d0 = _squarefree_part(Fraction(delta))
    return d0 if d0 % 4 == 1 else 4 * d0


# ----------------------------------------------------------------------------
# Local analysis
# ----------------------------------------------------------------------------


def is_square_in_Qp(x: Rational, p: int) -> bool:
    x = Fraction(x)
    if x == 0:
        return True
    v = valuation(x, p)
    if v % 2:
        return False
    u = x / Fraction(p) ** v
    if p == 2:
        num, den = u.numerator, u.denominator
        return num * pow(den, -1, 8) % 8 == 1
    num, den = u.numerator, u.denominator
    return kronecker(num * pow(den, -1, p) % p, p) == 1


def chi_p(delta: Rational, p: int) -> int:
    """The quadratic character of Q_p(sqrt(delta)): +1 split, -1 inert, 0 ramified.

    Defined for any nonzero delta; rational squares are split everywhere.
    """
    delta = Fraction(delta)
    if delta == 0:
        raise ValueError("chi_p needs a nonzero discriminant")
    v = valuation(delta, p)
    u = delta / Fraction(p) ** v
    if p == 2:
        if v % 2:
            return 0
        u8 = u.numerator * pow(u.denominator, -1, 8) % 8
        return {1: 1, 5: -1, 3: 0, 7: 0}[u8]
    if v % 2:
        return 0
    up = u.numerator * pow(u.denominator, -1, p) % p
    return kronecker(up, p)


def splitting_type(delta: Rational, p: int) -> str:
    return {1: "split", -1: "inert", 0: "ramified"}[chi_p(delta, p)]


def k_p(delta: Rational, p: int) -> int:
    """v_p(sigma) for delta = sigma^2 * D, straight from v_p(delta) and the unit part.

    Odd p: floor(v/2).  p = 2: odd v -> (v-3)/2; even v -> v/2 when the unit
    is 1 mod 4, else (v-2)/2.  (For odd v at 2 the input must satisfy
    v >= 3, which every discriminant-like quantity does.)
    """
    delta = Fraction(delta)
    v = valuation(delta, p)
    if p != 2:
        return v // 2
    if v % 2:
        if v < 3:
            raise ValueError(f"{delta} is not a 2-adic discriminant (v_2 = {v})")
        return (v - 3) // 2
    u = delta / Fraction(2) ** v
    u4 = u.numerator * pow(u.denominator, -1, 4) % 4
    return v // 2 if u4 == 1 else (v - 2) // 2


@dataclass(frozen=True, eq=True)
class DiscriminantData:
    """delta = sigma^2 * fund_D, with the S-local data downstream code needs."""

    delta: Fraction
    sigma: Fraction
    fund_D: int
    iota: int  # 0 for positive delta, 1 for negative
    tau: int  # delta / sigma_(q)^2, an integer
    epsilons: tuple[int, ...]  # (tau | q_i) per finite place
    k_map: dict = field(compare=False)

    @property
    def abs_tau(self) -> int:
        """|tau| = |delta|_infty * prod |delta|'_{q_i}: the modified total norm."""
        return abs(self.tau)


def factor_discriminant(delta: Rational | SRational, cfg: SConfig) -> DiscriminantData:
    """Factor a nonzero, nonsquare S-rational discriminant.

    Square (or zero) inputs are rejected; the caller routes those to the
    square-term path of the assembly layer.
    """
    if isinstance(delta, SRational):
        delta = delta.value
    delta = Fraction(delta)
    if delta == 0:
        raise ValueError("delta = 0 belongs to the square/degenerate path")
    if delta > 0 and gmpy2.is_square(delta.numerator) and gmpy2.is_square(delta.denominator):
        raise ValueError(f"delta = {delta} is a rational square; use the square path")
    if not cfg.is_s_unit_denominator(delta):
        raise ValueError(f"delta = {delta} is not S-rational")
    D = fundamental_discriminant(delta)
    sig2 = delta / D
    num, den = sig2.numerator, sig2.denominator
    sigma = Fraction(int(gmpy2.isqrt(num)), int(gmpy2.isqrt(den)))
    if sigma * sigma != sig2:
        raise ArithmeticError(f"square-class factorization failed for {delta}")
    k_map = {p: valuation(sigma, p) for p in cfg.finite_places}
    for p, e in factorize(sigma.numerator).items():
        if p not in k_map:
            k_map[p] = e
    sigma_q = Fraction(1)
    for p in cfg.finite_places:
        sigma_q *= Fraction(p) ** k_map[p]
    tau_f = delta / (sigma_q * sigma_q)
    if tau_f.denominator != 1:
        raise ArithmeticError(f"tau not integral for {delta}")
    tau = int(tau_f)
    eps = tuple(kronecker(tau, p) for p in cfg.finite_places)
    data = DiscriminantData(
        delta=delta,
        sigma=sigma,
        fund_D=D,
        iota=0 if delta > 0 else 1,
        tau=tau,
        epsilons=eps,
        k_map=k_map,
    )
    return data


# ----------------------------------------------------------------------------
# Class numbers, units, and the L(1) oracle
# ----------------------------------------------------------------------------


def _reduced_forms_negative(D: int) -> list[tuple[int, int, int]]:
    """All reduced (a,b,c) with b^2-4ac = D < 0: |b| <= a <= c, b >= 0 if |b|=a or a=c."""
    forms = []
    amax = math.isqrt(-D // 3) + 1
    for a in range(1, amax + 1):
        for b in range(-a, a + 1):
            if (b * b - D) % (4 * a):
                continue
            c = (b * b - D) // (4 * a)
            if c < a:
                continue
            if b < 0 and (abs(b) == a or a == c):
                continue
            forms.append((a, b, c))
    return forms


def _is_reduced_indefinite(a: int, b: int, D: int) -> bool:
    # 0 < b < sqrt(D) and sqrt(D) - 2|a| < b, all checked exactly
    if b <= 0 or b * b >= D:
        return False
    ta = 2 * abs(a)
    if (b + ta) ** 2 <= D:
        return False
    if ta > b and (ta - b) ** 2 >= D:
        return False
    return True


def _rho_step(form: tuple[int, int, int], D: int, sD: int) -> tuple[int, int, int]:
    a, b, c = form
    tc = 2 * abs(c)
    bp = sD - (sD + b) % tc
    cp = (bp * bp - D) // (4 * c)
    return (c, bp, cp)


def _reduced_cycles_positive(D: int) -> int:
    """Number of rho-cycles of reduced indefinite forms = narrow class number."""
    sD = math.isqrt(D)
    forms = set()
    for b in range(1, sD + 1):
        if (b - D) % 2:
            continue
        m = (b * b - D) // 4  # = a*c < 0
        for a in _divisors_signed(-m):
            c = m // a
            if _is_reduced_indefinite(a, b, D):
                forms.add((a, b, c))
    cycles = 0
    seen: set[tuple[int, int, int]] = set()
    for f in sorted(forms):
        if f in seen:
            continue
        cycles += 1
        g = f
        while True:
            seen.add(g)
            g = _rho_step(g, D, sD)
            if g == f:
                break
            if g in seen:
                raise ArithmeticError(f"rho-cycle structure broken at {g} for D={D}")
    return cycles


def _divisors_signed(n: int) -> list[int]:
    """All divisors of n > 0, positive and negative."""
    out = []
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            out.extend([d, -d])
            if d != n // d:
                out.extend([n // d, -(n // d)])
    return out


def _pell_min(m: int) -> tuple[int, int, int]:
    """Minimal (x, y, x^2 - m y^2 = +-1) for nonsquare m > 1, by continued fractions."""
    a0 = math.isqrt(m)
    P, Q, a = 0, 1, a0
    p_prev, p_cur = 1, a0
    q_prev, q_cur = 0, 1
    for _ in range(10**7):
        t = p_cur * p_cur - m * q_cur * q_cur
        if t == 1 or t == -1:
            return p_cur, q_cur, t
        P = a * Q - P
        Q = (m - P * P) // Q
        a = (a0 + P) // Q
        p_prev, p_cur = p_cur, a * p_cur + p_prev
        q_prev, q_cur = q_cur, a * q_cur + q_prev
    raise ArithmeticError(f"Pell iteration did not terminate for m={m}")


def _fundamental_unit(D: int) -> tuple[int, int, int]:
    """(t, u, norm) with eps = (t + u sqrt(D))/2 the fundamental unit of O_D, D > 0."""
    if D % 4 == 0:
        m = D // 4
        x, y, nrm = _pell_min(m)
        return 2 * x, y, nrm
    X, Y, nrm = _pell_min(D)
    # The unit X + Y sqrt(D) of Z[sqrt(D)] is eps or eps^3; detect a cube root
    # (t + u sqrt(D))/2 with odd t, u by exact verification.
    import mpmath

    with mpmath.workdps(60):
        x = mpmath.cbrt(X + Y * mpmath.sqrt(D))
        for sgn in (1, -1):
            t = int(mpmath.nint(x + sgn / x))
            u = int(mpmath.nint((x - sgn / x) / mpmath.sqrt(D)))
            if t <= 0 or u <= 0 or t % 2 == 0 or u % 2 == 0:
                continue
            if t * (t * t + 3 * D * u * u) == 8 * X and u * (3 * t * t + D * u * u) == 8 * Y:
                if t * t - D * u * u == 4 * sgn:
                    return t, u, sgn
    return 2 * X, 2 * Y, nrm


@functools.lru_cache(maxsize=4096)
def class_data(D: int) -> tuple[int, int | None, float]:
    """(h, w or None, log eps or 0.0) for a fundamental discriminant D.

    h is the wide class number.  For D < 0, w is the number of roots of unity;
    for D > 0, log eps is the regulator of the fundamental unit.
    The lru cache makes repeated oracle calls cheap and is thread-safe for
    our read-heavy usage.
    """
    if D == 1 or D == 0 or D % 4 not in (0, 1) or fundamental_discriminant(D) != D:
        raise ValueError(f"{D} is not a fundamental discriminant != 1")
    if D < 0:
        h = len(_reduced_forms_negative(D))
        w = 6 if D == -3 else 4 if D == -4 else 2
        return h, w, 0.0
    t, u, nrm = _fundamental_unit(D)
    log_eps = math.log((t + u * math.sqrt(D)) / 2)
    h_narrow = _reduced_cycles_positive(D)
    h = h_narrow if nrm == -1 else h_narrow // 2
    return h, None, log_eps


def L1_quadratic_oracle(D_prime: int, euler_strip: tuple[int, ...] = ()) -> float:
    """L(1, (D_prime|.)) with the Euler factors at `euler_strip` primes removed.

    D_prime = sigma'^2 * D with D fundamental; computed via the class number
    formula (reduced forms / continued fractions), the finitely many
    imprimitivity factors at p | sigma', and division by the strip factors
    (i.e. multiplication by (1 - (D_prime|p)/p)).
    """
    if D_prime == 0 or D_prime % 4 not in (0, 1):
        raise ValueError(f"{D_prime} is not a discriminant")
    if D_prime > 0 and gmpy2.is_square(D_prime):
        raise ValueError(f"{D_prime} is a perfect square; no quadratic field attached")
    D = fundamental_discriminant(D_prime)
    sigma2 = D_prime // D
    sigma_p = int(gmpy2.isqrt(sigma2))
    if sigma_p * sigma_p != sigma2:
        raise ValueError(f"{D_prime} is not sigma'^2 times a fundamental discriminant")
    h, w, log_eps = class_data(D)
    if D < 0:
        value = 2 * math.pi * h / (w * math.sqrt(-D))
    else:
        value = 2 * h * log_eps / math.sqrt(D)
    for p in factorize(sigma_p):
        value *= 1 - kronecker(D, p) / p
    for p in euler_strip:
        value *= 1 - kronecker(D_prime, p) / p
    return value
