"""Local orbital integrals and the theta-normalization layer.

Closed forms for the two standard level structures (full lattice stabilizer
at determinant level p^m, and the lattice-pair / Iwahori stabilizer) sit next
to a genuinely independent oracle that counts gamma-fixed chains directly:

*   a sublattice span(p^{t+c} e1, p^c (s e1 + e2)) of Z_p^2 is fixed by the
    companion matrix of x^2 - Tx + N iff s^2 + Ts + N = 0 mod p^t, so
    fixed-lattice counts per index reduce to root counts of the
    characteristic polynomial modulo prime powers;
*   for the lattice-pair case each fixed lattice contributes the number of
    gamma-stable lines in L/pL (eigenlines of the conjugated reduction);
*   the orbital integral is the stable growth rate of these counts in the
    index exponent (linear slope for split classes, period-two pair sum for
    inert, plateau for ramified), and the oracle detects the pattern and
    certifies stability over a window instead of trusting a splitting-type
    computation.

The rest of the module is plumbing shared by the assembly layer: exact
p-adic step functions with oscillatory integrals, compactly supported smooth
archimedean samplers with singular-weight quadrature, and materialization of
the normalized local factors into step-function data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

from scipy.integrate import quad

from .quadratic import chi_p, k_p, splitting_type
from .sarith import SConfig, char_e_p, valuation

__all__ = [
    "GammaClass",
    "PadicStepFunction",
    "ThetaData",
    "ArchSampler",
    "SaturationError",
    "RefinementError",
    "orb_maximal_closed",
    "orb_iwahori_closed",
    "orb_bruteforce",
    "hecke_volume",
    "hnf_count",
    "theta_p",
    "theta_p_limit",
    "shalika_constants",
    "step_integral",
    "step_oscillatory_integral",
    "bump_sampler",
    "arch_integral",
    "theta_inf_integrals",
    "materialize_theta_q",
    "find_representative",
]


class SaturationError(ArithmeticError):
    """The fixed-chain counts did not stabilize within the requested depth."""


class RefinementError(ArithmeticError):
    """Ball refinement exceeded its depth cap."""


@dataclass(frozen=True)
class GammaClass:
    """A regular semisimple rational class, stored by trace and determinant."""

    T: Fraction
    N: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "T", Fraction(self.T))
        object.__setattr__(self, "N", Fraction(self.N))
        if self.N == 0:
            raise ValueError("determinant must be nonzero")
        if self.T * self.T == 4 * self.N:
            raise ValueError("class is not regular semisimple (zero discriminant)")

    @property
    def delta(self) -> Fraction:
        return self.T * self.T - 4 * self.N


def _p_integral(x: Fraction, p: int) -> bool:
    return x.denominator % p != 0


def _v_or_none(x: Fraction, p: int) -> int | None:
    if x == 0:
        return None
    return valuation(x, p)


# ----------------------------------------------------------------------------
# Closed forms
# ----------------------------------------------------------------------------


def orb_maximal_closed(g: GammaClass, p: int, m: int) -> int:
    """Orbital integral of the determinant-level-p^m lattice-stabilizer indicator."""
    if not (_p_integral(g.T, p) and _p_integral(g.N, p)):
        return 0
    if _v_or_none(g.N, p) != m:
        return 0
    chi = chi_p(g.delta, p)
    k = k_p(g.delta, p)
    return 1 + sum(p ** j - chi * p ** (j - 1) for j in range(1, k + 1))


def orb_iwahori_closed(g: GammaClass, p: int) -> Fraction:
    """Orbital integral of the lattice-pair (Iwahori) indicator, exact rational."""
    if not (_p_integral(g.T, p) and _p_integral(g.N, p)):
        return Fraction(0)
    if _v_or_none(g.N, p) != 0:
        return Fraction(0)
    chi = chi_p(g.delta, p)
    k = k_p(g.delta, p)
    core = 1 + sum(p ** j - chi * p ** (j - 1) for j in range(1, k + 1))
    return Fraction(2 * core, p + 1) + Fraction(chi - 1, p + 1)


# ----------------------------------------------------------------------------
# The fixed-chain counting oracle
# ----------------------------------------------------------------------------


def _as_residue(x: Fraction, p: int, modulus: int) -> int:
    """x mod p^e for p-integral rational x."""
    return x.numerator * pow(x.denominator, -1, modulus) % modulus


def _root_levels(T: Fraction, N: Fraction, p: int, tmax: int) -> list[list[int]]:
    """roots[t] = all s mod p^t with s^2 + Ts + N = 0 mod p^t (roots[0] = [0])."""
    modulus = p ** (tmax + 1)
    Tm = _as_residue(T, p, modulus)
    Nm = _as_residue(N, p, modulus)
    levels = [[0]]
    for t in range(1, tmax + 1):
        pt = p ** t
        prev = p ** (t - 1)
        found = []
        for r in levels[-1]:
            for i in range(p):
                s = r + i * prev
                if (s * s + Tm * s + Nm) % pt == 0:
                    found.append(s)
        levels.append(found)
    return levels


def _eigenline_count(s: int, t: int, T: Fraction, N: Fraction, p: int) -> int:
    """Number of gamma-stable lines in L/pL for the fixed lattice (s, t, c)."""
    mod_big = p ** (t + 1)
    Tm = _as_residue(T, p, mod_big)
    Nm = _as_residue(N, p, mod_big)
    q = ((s * s + Tm * s + Nm) // p ** t) % p
    b11 = (-s) % p
    b12 = (-q) % p
    b21 = p ** t % p  # 1 if t == 0 else 0
    b22 = (s + Tm) % p
    count = 0
    # lines (1 : y) and (0 : 1)
    for x, y in [(1, yy) for yy in range(p)] + [(0, 1)]:
        vx = (b11 * x + b12 * y) % p
        vy = (b21 * x + b22 * y) % p
        if (vx * y - vy * x) % p == 0:
            count += 1
    return count


def _classify_growth(counts: Sequence[int]) -> str:
    """Growth pattern of the fixed-lattice count sequence.

    Linear growth (compact centralizer quotient in neither direction) means a
    split class; a flat tail means ramified (every index state occupied); a
    genuine period-two oscillation means inert (norms hit only even index
    shifts).  The lattice counts always separate the three: the inert parity
    classes can never balance because the largest stabilizer index sits on
    one side only.
    """
    x = list(counts)
    if len(x) < 5:
        raise SaturationError("lattice counts: window too short")
    s2a = x[-1] - x[-3]
    s2b = x[-2] - x[-4]
    if s2a == s2b and s2a > 0 and s2a % 2 == 0:
        return "linear"
    if s2a == 0 and s2b == 0:
        if x[-1] == x[-2]:
            return "plateau"
        return "oscillating"
    raise SaturationError(f"lattice counts {x} not saturated; raise depth")


def _extract_stable(counts: Sequence[Fraction | int], pattern: str, what: str) -> Fraction:
    """Read off the stable value of a count sequence under a known pattern."""
    x = [Fraction(c) for c in counts]
    s2a = (x[-1] - x[-3]) / 2
    s2b = (x[-2] - x[-4]) / 2
    if pattern == "linear":
        if s2a == s2b:
            return s2a
    elif pattern == "plateau":
        if x[-1] == x[-2] == x[-3]:
            return x[-1]
    elif pattern == "oscillating":
        if x[-1] + x[-2] == x[-2] + x[-3]:
            return x[-1] + x[-2]
    raise SaturationError(f"{what}: counts {counts} not saturated; raise depth")


def orb_bruteforce(g: GammaClass, p: int,
                   subgroup: tuple = ("maximal", 0), depth: int | None = None) -> Fraction:
    """Independent oracle: count gamma-fixed lattice chains, then extract.

    subgroup is ("maximal", m) or ("iwahori",).  depth bounds the index
    exponent window; the default adds a stabilization margin on top of the
    discriminant valuation.  Saturation is certified, never assumed.
    """
    if not (_p_integral(g.T, p) and _p_integral(g.N, p)):
        return Fraction(0)
    kind = subgroup[0]
    level = subgroup[1] if kind == "maximal" else 0
    if _v_or_none(g.N, p) != level:
        return Fraction(0)
    if depth is None:
        depth = valuation(g.delta, p) + level + 6
    emax = depth
    roots = _root_levels(g.T, g.N, p, emax)
    r_counts = [len(lv) for lv in roots]
    lattice_counts = [
        sum(r_counts[t] for t in range(e % 2, e + 1, 2)) for e in range(emax + 1)
    ]
    pattern = _classify_growth(lattice_counts)
    if kind == "maximal":
        return _extract_stable(lattice_counts, pattern, "lattice counts")
    flag_at_t = [
        sum(_eigenline_count(s, t, g.T, g.N, p) for s in roots[t]) for t in range(emax + 1)
    ]
    flag_counts = [
        sum(flag_at_t[t] for t in range(e % 2, e + 1, 2)) for e in range(emax + 1)
    ]
    return _extract_stable(flag_counts, pattern, "flag counts") / (p + 1)


# ----------------------------------------------------------------------------
# Hecke volumes
# ----------------------------------------------------------------------------


def hecke_volume(p: int, m: int) -> int:
    """Total mass of the determinant-level-p^m coset cell: sum of p^j."""
    return sum(p ** j for j in range(m + 1))


def hnf_count(p: int, m: int) -> int:
    """Dual route: literally enumerate upper-triangular lattice bases of
    determinant p^m (diagonal (p^j, p^{m-j}), top-right entry mod p^j)."""
    total = 0
    for j in range(m + 1):
        for _b in range(p ** j):
            total += 1
    return total


# ----------------------------------------------------------------------------
# theta_p and Shalika constants
# ----------------------------------------------------------------------------


def theta_p_limit(p: int, f_choice: tuple) -> float:
    """The k -> infinity limit of theta_p, shared by all splitting types."""
    if f_choice[0] == "maximal":
        return p ** (f_choice[1] / 2) * p / (p - 1)
    if f_choice[0] == "iwahori":
        return 2 * p / ((p - 1) * (p + 1))
    raise ValueError(f"no limit for f_choice {f_choice!r}")


def theta_p(g: GammaClass, p: int, f_choice) -> float | complex:
    """|N|_p^{-1/2} (1 - chi/p)^{-1} p^{-k} orb(f; gamma), or a step lookup.

    For the two standard choices this is assembled exactly from the closed
    forms; a PadicStepFunction is evaluated directly at the trace (the
    materialized-data route).
    """
    if isinstance(f_choice, PadicStepFunction):
        return f_choice.evaluate(g.T)
    if f_choice[0] == "maximal":
        orb = orb_maximal_closed(g, p, f_choice[1])
    elif f_choice[0] == "iwahori":
        orb = orb_iwahori_closed(g, p)
    else:
        raise ValueError(f"unknown f_choice {f_choice!r}")
    if orb == 0:
        return 0.0
    chi = chi_p(g.delta, p)
    k = k_p(g.delta, p)
    m = valuation(g.N, p)
    rat = Fraction(p, p - chi) * Fraction(1, p ** k) * Fraction(orb)
    return float(rat) * p ** (m / 2)


def shalika_constants(f_choice: tuple, p: int, a: Fraction | int = 1) -> tuple[Fraction, Fraction]:
    """(lambda_1, lambda_2) of the two-germ expansion around the center a.

    lambda_1 is the test function at the central element a*I; lambda_2 is
    (1 - 1/p)^{-1} times the unipotent orbital value (1 for the lattice
    stabilizer, 2/(p+1) for the lattice pair), gated by the same central
    support condition.
    """
    a = Fraction(a)
    if f_choice[0] == "maximal":
        m = f_choice[1]
        ok = _p_integral(a, p) and a != 0 and 2 * valuation(a, p) == m
        unip: Fraction = Fraction(1)
    elif f_choice[0] == "iwahori":
        ok = a != 0 and _p_integral(a, p) and valuation(a, p) == 0
        unip = Fraction(2, p + 1)
    else:
        raise ValueError(f"unknown f_choice {f_choice!r}")
    if not ok:
        return Fraction(0), Fraction(0)
    return Fraction(1), Fraction(p, p - 1) * unip


# ----------------------------------------------------------------------------
# p-adic step functions
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PadicStepFunction:
    """A finite complex combination of indicator functions of disjoint balls.

    A piece (c, e, v) contributes v on the ball c + p^e Z_p, which has
    volume p^{-e}.  Everything outside every ball is 0.
    """

    prime: int
    pieces: tuple[tuple[Fraction, int, complex], ...]

    def __post_init__(self) -> None:
        norm = tuple((Fraction(c), int(e), complex(v)) for c, e, v in self.pieces)
        object.__setattr__(self, "pieces", norm)
        for i, (c1, e1, _) in enumerate(norm):
            for c2, e2, _ in norm[i + 1:]:
                d = c1 - c2
                if d == 0 or valuation(d, self.prime) >= min(e1, e2):
                    raise ValueError("ball pieces must be pairwise disjoint")

    def evaluate(self, x: Fraction | int) -> complex:
        x = Fraction(x)
        for c, e, v in self.pieces:
            d = x - c
            if d == 0 or valuation(d, self.prime) >= e:
                return v
        return 0j

    def total_volume(self) -> Fraction:
        return sum((Fraction(1, self.prime ** e) for _, e, _ in self.pieces), Fraction(0))

    def to_json(self) -> str:
        return json.dumps({
            "prime": self.prime,
            "pieces": [
                {"center": f"{c.numerator}/{c.denominator}", "radius_exp": e,
                 "re": v.real, "im": v.imag}
                for c, e, v in self.pieces
            ],
        })

    @classmethod
    def from_json(cls, blob: str) -> "PadicStepFunction":
        data = json.loads(blob)
        pieces = tuple(
            (Fraction(piece["center"]), piece["radius_exp"],
             complex(piece["re"], piece["im"]))
            for piece in data["pieces"]
        )
        return cls(prime=data["prime"], pieces=pieces)


def step_integral(f: PadicStepFunction) -> complex:
    """Integral against the unit-volume Haar measure: exact finite sum."""
    return sum((v * float(Fraction(1, f.prime ** e)) for _, e, v in f.pieces), 0j)


def step_oscillatory_integral(f: PadicStepFunction, xi: Fraction, scale: Fraction,
                              depth_cap: int = 64) -> complex:
    """int f(y) e_p(-y xi / scale) dy, by refining until the character is
    constant per ball.

    On a ball c + p^e Z_p the character y -> e_p(-y w) is constant iff
    v_p(w) + e >= 0; otherwise its average vanishes (full root-of-unity sum
    over any finer level), so each piece contributes either
    value * e_p(-c w) * p^{-e} or 0.  The cap bounds the refinement that the
    vanishing argument implicitly performs.
    """
    w = Fraction(xi) / Fraction(scale)
    if w == 0:
        return step_integral(f)
    p = f.prime
    vw = valuation(w, p)
    total = 0j
    for c, e, v in f.pieces:
        need = -vw - e
        if need > depth_cap:
            raise RefinementError(
                f"character needs {need} refinement levels on a radius-{e} ball")
        if need <= 0:
            total += v * char_e_p(-c * w, p) * float(Fraction(1, p ** e))
    return total


# ----------------------------------------------------------------------------
# Archimedean samplers
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ArchSampler:
    """A smooth compactly supported sampler for one archimedean factor.

    support is the closed interval outside which fn vanishes; smooth_scale
    hints the smallest feature width (used to seed quadrature subdivision);
    vanishes_near_pm1 declares a neighbourhood of x = +-1 free of support,
    which lets singular-weight integrals skip the substitution step.
    """

    fn: Callable[[float], float]
    support: tuple[float, float]
    smooth_scale: float = 1.0
    vanishes_near_pm1: bool = False

    def __call__(self, x: float) -> float:
        lo, hi = self.support
        if x < lo or x > hi:
            return 0.0
        return self.fn(x)


def bump_sampler(center: float, width: float) -> ArchSampler:
    """The standard smooth bump exp(1 - 1/(1-u^2)) scaled to [c-w, c+w]."""

    def fn(x: float) -> float:
        u = (x - center) / width
        if abs(u) >= 1.0:
            return 0.0
        return math.exp(1.0 - 1.0 / (1.0 - u * u))

    lo, hi = center - width, center + width
    vanishes = not (lo - 1e-12 <= 1.0 <= hi + 1e-12) and \
               not (lo - 1e-12 <= -1.0 <= hi + 1e-12)
    return ArchSampler(fn=fn, support=(lo, hi),
                       smooth_scale=width, vanishes_near_pm1=vanishes)


def _quad_here(fn, lo: float, hi: float, pts: list[float]) -> tuple[float, float]:
    if hi <= lo:
        return 0.0, 0.0
    inner = [x for x in pts if lo < x < hi]
    val, err = quad(fn, lo, hi, points=inner or None, limit=300,
                    epsabs=1e-12, epsrel=1e-11)
    return val, err


def arch_integral(sampler: ArchSampler, sign: int, weight: str = "plain",
                  omega: float = 0.0) -> tuple[float | complex, float]:
    """int theta(x) w(x) dx for w in {plain, inv_sqrt, oscillatory}.

    sign selects which quadratic x^2 -+ 1 appears in the singular weight:
    +1 uses x^2 - 1 restricted to x^2 > 1, -1 uses x^2 + 1 (no singularity).
    The +-1 endpoints are removed by the square-root substitution
    x = +-(1 + t^2), keeping absolute error near 1e-12 per panel.
    """
    lo, hi = sampler.support
    if weight == "plain":
        val, err = _quad_here(sampler, lo, hi, [-1.0, 1.0])
    elif weight == "oscillatory":
        if omega == 0.0:
            val, err = _quad_here(sampler, lo, hi, [-1.0, 1.0])
            return complex(val), err
        w = 2 * math.pi * omega
        re, e1 = quad(sampler, lo, hi, weight="cos", wvar=w, limit=300,
                      epsabs=1e-12, epsrel=1e-11)
        im, e2 = quad(sampler, lo, hi, weight="sin", wvar=w, limit=300,
                      epsabs=1e-12, epsrel=1e-11)
        return complex(re, -im), e1 + e2
    elif weight == "inv_sqrt":
        if sign == -1:
            val, err = _quad_here(lambda x: sampler(x) / math.sqrt(x * x + 1), lo, hi, [])
        else:
            val, err = 0.0, 0.0
            if hi > 1.0:
                a = max(lo, 1.0)
                t1 = math.sqrt(max(hi - 1.0, 0.0))
                t0 = math.sqrt(max(a - 1.0, 0.0))
                v, e = _quad_here(
                    lambda t: 2.0 * sampler(1.0 + t * t) / math.sqrt(t * t + 2.0), t0, t1, [])
                val += v
                err += e
            if lo < -1.0:
                b = min(hi, -1.0)
                t1 = math.sqrt(max(-1.0 - lo, 0.0))
                t0 = math.sqrt(max(-1.0 - b, 0.0))
                v, e = _quad_here(
                    lambda t: 2.0 * sampler(-1.0 - t * t) / math.sqrt(t * t + 2.0), t0, t1, [])
                val += v
                err += e
    else:
        raise ValueError(f"unknown weight {weight!r}")
    if err > 1e-7:
        raise ArithmeticError(f"quadrature error estimate {err:.2e} did not converge")
    return val, err


# ----------------------------------------------------------------------------
# Aggregate theta data and materialization
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaData:
    """Everything the assembly layer needs about the test data.

    theta_q maps (sign, nu, place_index) to the materialized step function of
    the trace variable; nu_bound is an M with theta_q = 0 whenever any
    nu component is >= M.
    """

    theta_inf_plus: ArchSampler
    theta_inf_minus: ArchSampler
    theta_q: dict
    nu_bound: int


def theta_inf_integrals(theta: ThetaData, weight: str = "plain",
                        omega: float = 0.0) -> dict[int, float | complex]:
    """Both archimedean integrals under the requested weight, keyed by sign."""
    return {
        +1: arch_integral(theta.theta_inf_plus, +1, weight, omega)[0],
        -1: arch_integral(theta.theta_inf_minus, -1, weight, omega)[0],
    }


def _theta_closed_value(T: Fraction, N: Fraction, q: int, f_choice: tuple) -> float:
    g = GammaClass(T, N)
    return float(theta_p(g, q, f_choice))


def materialize_theta_slice(q: int, N: Fraction,
                            f_choice: tuple = ("maximal", 0),
                            depth_cap: int = 24) -> tuple[PadicStepFunction, float]:
    """Refine the trace line into balls on which theta_q(., N) is constant.

    A ball c + q^e Z_q is accepted once the discriminant's valuation and unit
    class are pinned by the ball data (v(delta(c)) + 3 <= min(v(2c) + e, 2e));
    balls still unresolved at depth_cap straddle the singular locus delta = 0
    and get the common k -> infinity limit value, with a certified error bound
    returned alongside (zero when no singular ball remains).
    """
    N = Fraction(N)
    level = f_choice[1] if f_choice[0] == "maximal" else 0
    if valuation(N, q) != level:
        return PadicStepFunction(prime=q, pieces=()), 0.0
    limit_val = theta_p_limit(q, f_choice)
    pieces: list[tuple[Fraction, int, complex]] = []
    err = 0.0
    work: list[tuple[Fraction, int]] = [(Fraction(0), 0)]
    while work:
        c, e = work.pop()
        delta_c = c * c - 4 * N
        vd = valuation(delta_c, q) if delta_c != 0 else None
        guard = min((valuation(2 * c, q) + e) if c != 0 else 10 ** 9, 2 * e)
        if vd is not None and vd + 3 <= guard:
            val = _theta_closed_value(c, N, q, f_choice)
            if val != 0.0:
                pieces.append((c, e, complex(val)))
            continue
        if e >= depth_cap:
            k_min = max((guard - 3) // 2, 0)
            bound = q ** (level / 2) * 2 * q ** (1 - k_min) / ((q - 1) * (q + 1))
            err += float(Fraction(1, q ** e)) * bound
            pieces.append((c, e, complex(limit_val)))
            continue
        for t in range(q):
            work.append((c + t * q ** e, e + 1))
    return PadicStepFunction(prime=q, pieces=tuple(pieces)), err


def materialize_theta_q(cfg: SConfig, place_index: int, sign: int, nu: tuple[int, ...],
                        f_choice: tuple = ("maximal", 0),
                        depth_cap: int = 24) -> tuple[PadicStepFunction, float]:
    """The slice materialization at N = sign * n * q^nu (the assembly default)."""
    q = cfg.finite_places[place_index]
    N = Fraction(sign) * cfg.hecke_n * cfg.q_power(nu)
    return materialize_theta_slice(q, N, f_choice, depth_cap)


# ----------------------------------------------------------------------------
# Representative search (shared by tests and the acceptance suite)
# ----------------------------------------------------------------------------


def invariant_feasible(p: int, splitting: str, k: int, m: int) -> bool:
    """Whether an integral class with these local invariants exists (odd p).

    With w = v_p(delta): w = 2 v_p(T) when that is below m (and the unit part
    is then automatically a square, so only split classes occur there),
    w = m exactly when v_p(T) overshoots, and w > m requires 2 v_p(T) = m.
    Ramified classes need w = 2k + 1 odd, the others w = 2k even.
    """
    if p == 2:
        raise ValueError("feasibility table is for odd residual primes")
    if splitting == "split":
        return not (2 * k > m and m % 2 == 1)
    if splitting == "inert":
        return 2 * k == m or (2 * k > m and m % 2 == 0)
    if splitting == "ramified":
        w = 2 * k + 1
        return (m % 2 == 1 and w == m) or (m % 2 == 0 and w > m)
    raise ValueError(f"unknown splitting {splitting!r}")


@lru_cache(maxsize=None)
def find_representative(p: int, splitting: str, k: int, m: int = 0) -> GammaClass:
    """A small integral (T, N) with the requested local invariants at p."""
    if p != 2 and not invariant_feasible(p, splitting, k, m):
        raise ValueError(f"no classes have p={p} {splitting} k={k} m={m}")
    for u in range(1, 6 * p * p):
        if u % p == 0:
            continue
        for s in (1, -1):
            n_int = s * u * p ** m
            for T in range(0, 8 * p ** (k + 2)):
                delta = T * T - 4 * n_int
                if delta == 0:
                    continue
                if splitting_type(delta, p) != splitting:
                    continue
                if k_p(delta, p) != k:
                    continue
                return GammaClass(Fraction(T), Fraction(n_int))
    raise RuntimeError(f"search bound hit for p={p} {splitting} k={k} m={m}")
