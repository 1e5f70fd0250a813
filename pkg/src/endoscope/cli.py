"""Configuration-driven command surface for the verification suites.

Each subcommand runs one suite against the data described by a TOML config,
prints a human-readable table, and writes a JSON run manifest (schema "v1").
Apart from the wall-clock section, identical configs produce identical
manifests: every summation order and quadrature grid is fixed.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction

import click

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from .elliptic import (
    EllipticConfig,
    TermReport,
    TruncationBudget,
    _echo,
    arith_block,
    dual_block,
    eisenstein_term,
    one_dim_term,
    poisson_closed_form_check,
    sigma_square,
    sigma_xi_nonzero,
    sigma_zero,
    standard_theta,
    trace_eisenstein,
    trace_one_dim,
    verify_final,
)
from .kloosterman import D_global, KloostermanParams, kl_local_product, kl_sum
from .orbital import (
    PadicStepFunction,
    ThetaData,
    bump_sampler,
    find_representative,
    hecke_volume,
    hnf_count,
    invariant_feasible,
    orb_bruteforce,
    orb_iwahori_closed,
    orb_maximal_closed,
    shalika_constants,
)
from .quadratic import chi_p, k_p
from .sarith import SConfig, SemilocalPoint, char_e_S, reduce_mod_ZS, s_integer_samples
from .specfun import besselK_at2, besselK_at2_series, circle_probe, mellinF, zeta
from .zagier import afe_L1, functional_equation_rhs, partial_zagier_direct

SCHEMA = "v1"


class ConfigError(click.ClickException):
    """Config validation failure, reported with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ----------------------------------------------------------------------------
# config parsing
# ----------------------------------------------------------------------------


DEFAULT_CONFIG: dict = {
    "S": {"finite_places": [2], "hecke_n": 1},
    "theta": {
        "plus": {"family": "bump", "center": 1.1, "width": 1.05},
        "minus": {"family": "bump", "center": 0.8, "width": 0.9},
        "q": ["standard:f=K"],
        "depth": 48,
        "vartheta": 0.5,
    },
    "truncation": {},
    "tolerance": {"relative": 1e-6, "final": 1e-2},
    "grid": {},
}


@dataclass
class RunConfig:
    cfg: SConfig
    theta: ThetaData
    vartheta: float
    truncation: TruncationBudget
    rel_tol: float
    final_tol: float
    grid: dict
    raw: dict = field(repr=False)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_f_choice(spec, path: str):
    if isinstance(spec, str):
        if spec.startswith("standard:f="):
            tag = spec[len("standard:f="):]
            if tag == "K":
                return ("maximal", 0)
            if tag == "I":
                return ("iwahori",)
            if tag.startswith("X^"):
                try:
                    return ("maximal", int(tag[2:]))
                except ValueError:
                    raise ConfigError(path, f"bad level in {spec!r}") from None
            raise ConfigError(path, f"unknown standard test {tag!r}")
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(path, f"not a standard spec or JSON step: {exc}") from None
    if not isinstance(spec, dict) or "prime" not in spec or "pieces" not in spec:
        raise ConfigError(path, "inline step needs 'prime' and 'pieces'")
    pieces = tuple(
        (Fraction(str(c)), int(e), complex(float(re), float(im)))
        for c, e, re, im in spec["pieces"])
    return PadicStepFunction(prime=int(spec["prime"]), pieces=pieces)


def _bump_from(table: dict, path: str):
    fam = table.get("family", "bump")
    if fam != "bump":
        raise ConfigError(f"{path}.family", f"unknown sampler family {fam!r}")
    return float(table["center"]), float(table["width"])


def parse_config(data: dict) -> RunConfig:
    data = _merge(DEFAULT_CONFIG, data)
    s_tab = data["S"]
    places = tuple(int(q) for q in s_tab["finite_places"])
    if 2 not in places:
        raise ConfigError("S.finite_places", "finite_places must contain 2")
    try:
        cfg = SConfig(finite_places=places, hecke_n=int(s_tab.get("hecke_n", 1)))
    except ValueError as exc:
        raise ConfigError("S", str(exc)) from None

    th = data["theta"]
    q_specs = th["q"]
    if len(q_specs) == 1 and cfg.r > 1:
        q_specs = list(q_specs) * cfg.r
    if len(q_specs) != cfg.r:
        raise ConfigError("theta.q", f"need one local test per place, got {len(q_specs)}")
    parsed = [_parse_f_choice(spec, f"theta.q[{i}]") for i, spec in enumerate(q_specs)]
    f_choices = tuple(fc if isinstance(fc, tuple) else ("maximal", 0) for fc in parsed)
    depth = int(th.get("depth", 48))
    theta = standard_theta(cfg, plus=_bump_from(th["plus"], "theta.plus"),
                           minus=_bump_from(th["minus"], "theta.minus"),
                           f_choices=f_choices, depth=depth)
    levels = tuple(fc[1] if fc[0] == "maximal" else 0 for fc in f_choices)
    for i, fc in enumerate(parsed):
        if isinstance(fc, PadicStepFunction):
            for sign in (+1, -1):
                theta.theta_q[(sign, levels, i)] = fc

    tr = data["truncation"]
    known = {f.name for f in fields(TruncationBudget)}
    for key in tr:
        if key not in known:
            raise ConfigError(f"truncation.{key}", "unknown truncation field")
    truncation = replace(TruncationBudget(), **tr)

    tol = data["tolerance"]
    vt = float(th.get("vartheta", 0.5))
    if not (0.0 < vt < 1.0):
        raise ConfigError("theta.vartheta", "must lie strictly between 0 and 1")
    return RunConfig(cfg=cfg, theta=theta, vartheta=vt, truncation=truncation,
                     rel_tol=float(tol.get("relative", 1e-6)),
                     final_tol=float(tol.get("final", 1e-2)),
                     grid=data["grid"], raw=data)


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config({})
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(path, f"TOML parse error: {exc}") from None
    return parse_config(data)


def _elliptic_config(rc: RunConfig) -> EllipticConfig:
    return EllipticConfig(cfg=rc.cfg, theta=rc.theta, vartheta=rc.vartheta,
                          truncation=rc.truncation, tolerance=rc.rel_tol)


# ----------------------------------------------------------------------------
# verification phases: each returns (reports, passed)
# ----------------------------------------------------------------------------


def check_orbital(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    grid = rc.grid
    primes = tuple(grid.get("orbital_primes", (3, 5, 7)))
    ks = tuple(grid.get("orbital_ks", (0, 1, 2)))
    ms = tuple(grid.get("orbital_ms", (0, 1, 2)))
    closed_bad = germ_bad = vol_bad = 0
    cases = 0
    for p in primes:
        for typ in ("split", "inert", "ramified"):
            for k in ks:
                for m in ms:
                    if not invariant_feasible(p, typ, k, m):
                        continue
                    cases += 1
                    g = find_representative(p, typ, k, m)
                    if orb_maximal_closed(g, p, m) != orb_bruteforce(g, p, ("maximal", m)):
                        closed_bad += 1
                    if orb_iwahori_closed(g, p) != orb_bruteforce(g, p, ("iwahori",)):
                        closed_bad += 1
    germ_cases = 0
    for p in primes[:2]:
        for typ in ("split", "inert", "ramified"):
            for k in ks:
                if not invariant_feasible(p, typ, k, 0):
                    continue
                g = find_representative(p, typ, k, 0)
                chi, kk = chi_p(g.delta, p), k_p(g.delta, p)
                for f in (("maximal", 0), ("iwahori",)):
                    germ_cases += 1
                    l1, l2 = shalika_constants(f, p, 1)
                    rhs = l1 * Fraction(1 - chi, 1 - p) \
                        + l2 * (1 - Fraction(chi, p)) * p ** kk
                    if orb_bruteforce(g, p, f) != rhs:
                        germ_bad += 1
    vol_cases = 0
    for p in (2, 3, 5, 7):
        for m in range(5):
            vol_cases += 1
            vol = hecke_volume(p, m)
            if vol != hnf_count(p, m):
                vol_bad += 1
            closed = Fraction(p ** m) * (1 - Fraction(1, p ** (m + 1))) \
                / (1 - Fraction(1, p))
            if vol != closed:
                vol_bad += 1
    reports = [
        TermReport(name="orbital_closed_forms", value=closed_bad,
                   truncation_error_estimate=0.0,
                   params_echo=_echo(cases=cases, mismatches=closed_bad)),
        TermReport(name="orbital_germ_identity", value=germ_bad,
                   truncation_error_estimate=0.0,
                   params_echo=_echo(cases=germ_cases, mismatches=germ_bad)),
        TermReport(name="orbital_hecke_volumes", value=vol_bad,
                   truncation_error_estimate=0.0,
                   params_echo=_echo(cases=vol_cases, mismatches=vol_bad)),
    ]
    return reports, closed_bad == germ_bad == vol_bad == 0


def check_kloosterman(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    cap = int(rc.grid.get("kloosterman_cap", 10_000))
    ms = tuple(rc.grid.get("kloosterman_ms", (1, -1, 3, -3, 5, 9)))
    bad = cases = 0
    table = []
    for f in (1, 3, 5, 7, 9):
        if any(f % q == 0 for q in rc.cfg.finite_places):
            continue
        for k in range(1, cap // (f * f) + 1):
            if any(k % q == 0 for q in rc.cfg.finite_places):
                continue
            for m in ms:
                cases += 1
                direct = kl_sum(KloostermanParams(k=k, f=f, xi=Fraction(0),
                                                  m=Fraction(m)), rc.cfg)
                crt = kl_local_product(k, f, Fraction(m))
                if direct != crt:
                    bad += 1
                if len(table) < 8 and k <= 5:
                    table.append([k, f, m, int(crt.real)])
    rep = TermReport(name="kloosterman_crt", value=bad,
                     truncation_error_estimate=0.0,
                     params_echo=_echo(cases=cases, cap=cap, sample_table=table))
    return [rep], bad == 0


def check_dirichlet(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    U = int(rc.grid.get("dirichlet_U", 6000))
    V = int(rc.grid.get("dirichlet_V", 48))
    tol = rc.rel_tol * scale
    worst = 0.0
    cases = 0
    for places in ((2,), (2, 3)):
        cfg = SConfig(finite_places=places, hecke_n=1)
        for s in (2.0, 3.0):
            for m in (1, 3, 9):
                if any(m % q == 0 for q in places):
                    continue
                cases += 1
                closed = D_global(s, Fraction(m), cfg)
                trunc = D_global(s, Fraction(m), cfg, route=("truncated", U, V))
                worst = max(worst, abs(trunc - closed) / abs(closed))
    rep = TermReport(name="kloosterman_dirichlet_series", value=worst,
                     truncation_error_estimate=0.0,
                     params_echo=_echo(cases=cases, U=U, V=V, tol=tol))
    return [rep], worst <= tol


def check_specfun(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    checks: dict[str, float] = {}
    probe = circle_probe(lambda s: mellinF(s), 0.0, 0.1)
    checks["transform_residue_at_zero"] = abs(probe - 1.0)
    odd = max(abs(complex(mellinF(s)) + complex(mellinF(-s)))
              for s in (0.1, 0.35j, 0.2 + 0.4j, 1.1, 0.8 - 0.3j,
                        1.9j, 0.05, 2.2 + 0.1j, 0.6 - 1.2j, 1.4 + 1.4j))
    checks["transform_odd"] = odd
    ks = max(abs(complex(besselK_at2(s)) - besselK_at2_series(s))
             for s in (0.0, 0.5, 1.25 + 0.5j))
    checks["bessel_quadrature_vs_series"] = ks
    checks["zeta_at_zero"] = abs(complex(zeta(0.0)) + 0.5)
    res = circle_probe(lambda s: complex(zeta(2 * s + 2)) / complex(zeta(s + 2)),
                       -0.5, 0.1, n=256)
    checks["half_line_residue"] = abs(res - 1.0 / (2.0 * complex(zeta(1.5))))
    tols = {"transform_residue_at_zero": 1e-8, "transform_odd": 1e-10,
            "bessel_quadrature_vs_series": 1e-10, "zeta_at_zero": 1e-12,
            "half_line_residue": 1e-8}
    passed = all(checks[k] <= tols[k] * scale for k in checks)
    rep = TermReport(name="special_function_identities",
                     value=max(checks.values()), truncation_error_estimate=0.0,
                     params_echo=_echo(**{k: float(v) for k, v in checks.items()}))
    return [rep], passed


def check_zagier_fe(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    tol = 1e-6 * scale
    worst = 0.0
    cases = 0
    for delta in (5, -4, 45, -20, 12):
        for s in (0.25, 0.5, 0.75):
            cases += 1
            lhs = partial_zagier_direct(s, delta, rc.cfg)
            rhs = functional_equation_rhs(s, delta, rc.cfg)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    rep = TermReport(name="zagier_functional_equation", value=worst,
                     truncation_error_estimate=0.0,
                     params_echo=_echo(cases=cases, tol=tol))
    return [rep], worst <= tol


def check_zagier_afe(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    bound = int(rc.grid.get("afe_bound", 100))
    tol = rc.rel_tol * scale
    worst = inv_worst = 0.0
    cases = 0
    for delta in range(-bound, bound + 1):
        if delta == 0 or delta % 4 not in (0, 1):
            continue
        if delta > 0 and math.isqrt(delta) ** 2 == delta:
            continue
        cases += 1
        a_val = afe_L1(delta, 10.0, rc.cfg).value.real
        # class-number-formula route per square divisor, with the S factors
        oracle = partial_zagier_direct(1, delta, rc.cfg).real
        worst = max(worst, abs(a_val - oracle) / abs(oracle))
        inv_worst = max(inv_worst, abs(afe_L1(delta, 100.0, rc.cfg).value.real - a_val)
                        / abs(oracle))
    reports = [
        TermReport(name="approximate_functional_equation", value=worst,
                   truncation_error_estimate=0.0,
                   params_echo=_echo(cases=cases, bound=bound)),
        TermReport(name="afe_window_invariance", value=inv_worst,
                   truncation_error_estimate=0.0, params_echo=_echo(decade=(10, 100))),
    ]
    return reports, worst <= tol and inv_worst <= tol


def check_poisson(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    pair_worst = 0.0
    for k, a in ((1, 0), (3, 1), (5, 2)):
        lhs, rhs = poisson_closed_form_check(rc.cfg, k=k, a=a)
        pair_worst = max(pair_worst, abs(lhs - rhs))
    samples = int(rc.grid.get("poisson_samples", 1000))
    red_bad = 0
    for x in s_integer_samples(rc.cfg, samples, height=50):
        pt = SemilocalPoint.diagonal(Fraction(x), rc.cfg)
        reduced, shift = reduce_mod_ZS(pt, rc.cfg)
        again, shift2 = reduce_mod_ZS(reduced, rc.cfg)
        if again != reduced or shift2 != 0:
            red_bad += 1
        if char_e_S(pt, rc.cfg) != 1:
            red_bad += 1
    ec = _elliptic_config(rc)
    kf_caps = rc.grid.get("poisson_kf", (5, 2))
    block_worst = 0.0
    blocks = 0
    ok = True
    for sign, nu in ec.blocks():
        for f in range(1, int(kf_caps[1]) + 1):
            if any(f % q == 0 for q in rc.cfg.finite_places):
                continue
            for k in range(1, int(kf_caps[0]) + 1, 1):
                if any(k % q == 0 for q in rc.cfg.finite_places):
                    continue
                blocks += 1
                aval, _ = arith_block(ec, k, f, sign, nu)
                dval, dtail = dual_block(ec, k, f, sign, nu)
                diff = abs(aval - dval)
                block_worst = max(block_worst, diff)
                if diff > dtail + 1e-4 * scale:
                    ok = False
    reports = [
        TermReport(name="poisson_closed_form_pairs", value=pair_worst,
                   truncation_error_estimate=0.0, params_echo=_echo(pairs=3)),
        TermReport(name="fundamental_domain_reduction", value=red_bad,
                   truncation_error_estimate=0.0, params_echo=_echo(samples=samples)),
        TermReport(name="blockwise_poisson", value=block_worst,
                   truncation_error_estimate=0.0,
                   params_echo=_echo(blocks=blocks, kf_caps=list(kf_caps))),
    ]
    passed = ok and pair_worst <= 1e-8 * scale and red_bad == 0
    return reports, passed


def check_sigma_terms(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    ec = _elliptic_config(rc)
    reports = [sigma_square(ec), sigma_zero(ec), sigma_xi_nonzero(ec)]
    passed = all(math.isfinite(r.value.real) and math.isfinite(r.truncation_error_estimate)
                 for r in reports)
    return reports, passed


def check_traces(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    ec = _elliptic_config(rc)
    tol = rc.rel_tol * scale
    od, t1 = one_dim_term(ec), trace_one_dim(ec)
    eis, t2 = eisenstein_term(ec), trace_eisenstein(ec)
    d1 = abs(od.value - t1.value) / max(abs(t1.value), 1e-30)
    d2 = abs(eis.value - 0.5 * t2.value) / max(abs(eis.value), 1e-30)
    rep = TermReport(name="spectral_equalities", value=max(d1, d2),
                     truncation_error_estimate=max(
                         t1.truncation_error_estimate, t2.truncation_error_estimate),
                     params_echo=_echo(one_dim=od.value.real,
                                       eisenstein=eis.value.real,
                                       one_dim_rel=d1, eisenstein_rel=d2, tol=tol))
    return [od, t1, eis, t2, rep], max(d1, d2) <= tol


def check_final(rc: RunConfig, scale: float) -> tuple[list[TermReport], bool]:
    ec = _elliptic_config(rc)
    rep = verify_final(ec)
    echo = json.loads(rep.params_echo)
    echo["truncation_budget"] = {f.name: getattr(rc.truncation, f.name)
                                 for f in fields(TruncationBudget)}
    rep = TermReport(name=rep.name, value=rep.value,
                     truncation_error_estimate=rep.truncation_error_estimate,
                     params_echo=json.dumps(echo, sort_keys=True))
    passed = abs(rep.value) <= rc.final_tol * scale * echo["largest_term"]
    return [rep], passed


PHASES: dict[str, tuple] = {
    "orbital-oracle": check_orbital,
    "kloosterman": check_kloosterman,
    "dirichlet-series": check_dirichlet,
    "specfun": check_specfun,
    "zagier-fe": check_zagier_fe,
    "zagier-afe": check_zagier_afe,
    "poisson": check_poisson,
    "sigma-terms": check_sigma_terms,
    "traces": check_traces,
    "final-identity": check_final,
}


# ----------------------------------------------------------------------------
# manifest assembly and the click surface
# ----------------------------------------------------------------------------


def run_phases(rc: RunConfig, names: list[str], jobs: int,
               scale: float) -> tuple[dict, bool]:
    timings: dict[str, float] = {}
    results: dict[str, tuple[list[TermReport], bool]] = {}

    def one(name: str):
        t0 = time.perf_counter()
        out = PHASES[name](rc, scale)
        timings[name] = round(time.perf_counter() - t0, 3)
        return name, out

    if jobs > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for name, out in pool.map(one, names):
                results[name] = out
    else:
        for name in names:
            results[name] = one(name)[1]

    reports = []
    criteria = {}
    for name in names:  # fixed order regardless of completion order
        phase_reports, ok = results[name]
        criteria[name] = bool(ok)
        reports.extend(json.loads(r.to_json()) for r in phase_reports)
    manifest = {
        "schema": SCHEMA,
        "config": rc.raw,
        "tolerance_scale": scale,
        "jobs": jobs,
        "seed_env": {"ENDOSCOPE_SEED": os.environ.get("ENDOSCOPE_SEED"),
                     "note": "logged only; all core paths are deterministic"},
        "reports": reports,
        "criteria": criteria,
        "passed": all(criteria.values()),
        "timings": timings,
    }
    return manifest, manifest["passed"]


def _print_table(manifest: dict) -> None:
    click.echo(f"{'phase':<22} {'status':<6} {'worst/value':>14} {'trunc est':>12} {'sec':>8}")
    for name, ok in manifest["criteria"].items():
        status = "pass" if ok else "FAIL"
        secs = manifest["timings"].get(name, 0.0)
        click.echo(f"{name:<22} {status:<6} {'':>14} {'':>12} {secs:>8.2f}")
    for rep in manifest["reports"]:
        click.echo(f"  {rep['name']:<28} {rep['re']:>+14.6e} {rep['trunc_est']:>12.2e}")
    click.echo("overall: " + ("pass" if manifest["passed"] else "FAIL"))


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML run configuration; defaults to the standard data.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Manifest destination (default: <command>_manifest.json).")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Bounded worker pool size for independent phases.")
@click.option("--tolerance-scale", type=float, default=1.0, show_default=True,
              help="Multiplies every pass/fail tolerance.")
@click.option("--no-timings", is_flag=True, default=False,
              help="Zero the timings section so manifests are byte-reproducible.")
@click.pass_context
def main(ctx, config_path, out_path, jobs, tolerance_scale, no_timings):
    """Verification suites for the semilocal trace-identity toolkit."""
    ctx.ensure_object(dict)
    ctx.obj.update(config_path=config_path, out_path=out_path,
                   jobs=jobs, scale=tolerance_scale, no_timings=no_timings)


def _dispatch(ctx, names: list[str], command: str) -> None:
    rc = load_config(ctx.obj["config_path"])
    manifest, passed = run_phases(rc, names, ctx.obj["jobs"], ctx.obj["scale"])
    manifest["command"] = command
    if ctx.obj.get("no_timings"):
        manifest["timings"] = {name: 0.0 for name in manifest["timings"]}
    out = ctx.obj["out_path"] or f"{command.replace('-', '_')}_manifest.json"
    with open(out, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _print_table(manifest)
    click.echo(f"manifest: {out}")
    ctx.exit(0 if passed else 1)


def _register(name: str, help_text: str):
    @main.command(name=name, help=help_text)
    @click.pass_context
    def _cmd(ctx):
        _dispatch(ctx, [name], name)


_register("orbital-oracle", "Closed orbital forms, germ identity, Hecke volumes.")
_register("kloosterman", "CRT factorization of generalized Kloosterman sums.")
_register("dirichlet-series", "Truncated Kloosterman Dirichlet series vs Euler product.")
_register("specfun", "Special-function identities behind the kernel transforms.")
_register("zagier-fe", "Functional equation of the partial quadratic L-series.")
_register("zagier-afe", "Approximate functional equation vs class-number oracle.")
_register("poisson", "Semilocal summation formulas, blockwise and closed-form.")
_register("sigma-terms", "Square, central-frequency and nonzero-frequency terms.")
_register("traces", "Spectral trace sums vs their direct-integral twins.")
_register("final-identity", "End-to-end residual of the full comparison.")


@main.command(name="all", help="Every suite, in a fixed order.")
@click.pass_context
def _all(ctx):
    _dispatch(ctx, list(PHASES), "all")


if __name__ == "__main__":
    main()
