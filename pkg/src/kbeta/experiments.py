"""Experiment runners behind the CLI.

Each runner takes a validated :class:`ExperimentConfig` and returns an
:class:`Outcome`: result records, named two-column curves, invariant checks
and a few summary lines.  Writing files is left to the CLI so runners stay
pure and testable.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .config import ExperimentConfig, parse_ray_spec
from .divisorial import SncModelData, l_beta_snc, lct_shift
from .errors import ConfigInvalid, KBetaError, NumericalFailure, SlopeUnstable
from .functionals import (
    d1,
    energy_I,
    ent_beta,
    entropy,
    functional_report,
    k_beta,
    k_energy,
)
from .quantizer import TOL_NEWTON, quantize
from .rays import (
    GeodesicRay,
    SlopeEstimate,
    l_beta_numeric,
    radial_slope,
    ray_grid,
)
from .reduction_geometry import ReducedPotential, SGrid, load_potential, rooftop_envelope
from .seeds import corpus, harmonic_shape, seed_bump

TOL = 1e-6


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class Series:
    """One curve for a plot-data file; curves sharing ``figure`` share a plot."""

    name: str
    x: tuple[float, ...]
    y: tuple[float, ...]
    xlabel: str
    ylabel: str
    figure: str
    logx: bool = False
    label: str = ""


@dataclass
class Outcome:
    records: list[dict] = field(default_factory=list)
    series: list[Series] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _num(x) -> float | str:
    """JSON-safe float (infinities become strings)."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _frac(x: Fraction) -> dict:
    return {"exact": str(x), "decimal": float(x)}


def _grid(cfg: ExperimentConfig) -> SGrid:
    return SGrid.symmetric(cfg.get_float("half_width", positive=True), cfg.get_int("n_points", minimum=3))


def build_potential(cfg: ExperimentConfig, spec: str, grid: SGrid) -> ReducedPotential:
    kind, _, rest = spec.partition(":")
    if kind == "zero":
        return ReducedPotential.zeros(grid)
    if kind == "seed-bump":
        return seed_bump(grid)
    if kind == "constant":
        return ReducedPotential.constant(grid, float(rest))
    if kind == "harmonic":
        a, b = (float(p) for p in rest.split(":"))
        return ReducedPotential(grid, harmonic_shape(grid, a, b))
    if kind == "file":
        u = load_potential(cfg.resolve(rest))
        return u
    raise ValueError(f"unknown potential spec '{spec}'")


def _slope(fn: Callable[[], SlopeEstimate], strict: bool) -> tuple[SlopeEstimate, bool]:
    """Run a slope fit; in non-strict mode an unstable fit is kept and flagged."""
    try:
        return fn(), False
    except SlopeUnstable as exc:
        if strict or exc.estimate is None:
            raise NumericalFailure(str(exc)) from exc
        return exc.estimate, True


def _slope_record(est: SlopeEstimate, unstable: bool) -> dict:
    return {
        "value": est.value,
        "stderr": est.stderr,
        "t_window": list(est.t_window),
        "samples": est.samples,
        "residual_rms": est.residual_rms,
        "unstable": unstable,
    }


# ---------------------------------------------------------------------------
# quantize-sweep
# ---------------------------------------------------------------------------


def run_quantize_sweep(cfg: ExperimentConfig, jobs: int = 1, strict: bool = False) -> Outcome:
    grid = _grid(cfg)
    spec = cfg.get("potential")
    u = build_potential(cfg, spec, grid)
    betas = sorted(float(b) for b in cfg.get_betas())
    ent = entropy(u)
    out = Outcome()
    ebs, dists, ent_ub = [], [], []
    for b in betas:
        res = _in_case(f"{spec}@beta={b:g}", quantize, u, b)
        eb = ent_beta(u, b, result=res)
        dist = d1(res.u_beta, u)
        e_ub = entropy(res.u_beta)
        ebs.append(eb)
        dists.append(dist)
        ent_ub.append(e_ub)
        out.records.append(
            {
                "case": f"{spec}@beta={b:g}",
                "beta": b,
                "entropy": _num(ent),
                "ent_beta": eb,
                "entropy_of_u_beta": _num(e_ub),
                "d1_u_beta_u": dist,
                "residual_sup": res.residual_sup,
                "newton_iters": res.newton_iters,
            }
        )
    sandwich = all(e_ub - TOL <= eb <= ent + TOL for eb, e_ub in zip(ebs, ent_ub))
    mono = all(b2 >= b1 - 1e-8 for b1, b2 in zip(ebs, ebs[1:]))
    ratio = all(e1 / b1 >= e2 / b2 - 1e-8 for e1, b1, e2, b2 in zip(ebs, betas, ebs[1:], betas[1:]))
    d1_dec = all(d2 <= d1_ + 1e-10 for d1_, d2 in zip(dists, dists[1:]))
    out.checks += [
        Check("sandwich", sandwich, "Ent(u^beta) <= Ent^beta(u) <= Ent(u) within 1e-6"),
        Check("monotone_in_beta", mono, "Ent^beta nondecreasing in beta within 1e-8"),
        Check("ratio_in_beta", ratio, "Ent^beta/beta nonincreasing within 1e-8"),
        Check("d1_decreasing", d1_dec, "d1(u^beta, u) nonincreasing in beta"),
    ]
    out.series += [
        Series("beta_vs_ent_beta", tuple(betas), tuple(ebs), "beta", "Ent^beta(u)", "ent_beta", True),
        Series("beta_vs_d1", tuple(betas), tuple(dists), "beta", "d1(u^beta, u)", "d1", True),
    ]
    gap = (ent - ebs[-1]) / ent if ent > 0 and math.isfinite(ent) else 0.0
    out.summary.append(f"potential {spec}: Ent = {ent:.8g}, Ent^beta at beta={betas[-1]:g} = {ebs[-1]:.8g} (relative gap {gap:.3%})")
    return out


# ---------------------------------------------------------------------------
# functional-report
# ---------------------------------------------------------------------------


def _in_case(name: str, fn, *args):
    """Run ``fn`` and tag any numerical error with the case that raised it."""
    try:
        return fn(*args)
    except (KBetaError, FloatingPointError) as exc:
        if isinstance(exc, (ConfigInvalid, SlopeUnstable)):
            raise
        raise NumericalFailure(f"case {name}: {type(exc).__name__}: {exc}") from exc


def _report_case(args):
    cfg, spec, beta = args
    grid = _grid(cfg)
    u = build_potential(cfg, spec, grid)
    rep = _in_case(spec, functional_report, u, beta)
    return spec, rep.to_record(), rep


def run_functional_report(cfg: ExperimentConfig, jobs: int = 1, strict: bool = False) -> Outcome:
    beta = float(cfg.get_betas("beta")[0])
    specs = cfg.get_list("potentials")
    tasks = [(cfg, s, beta) for s in specs]
    results = _map(_report_case, tasks, jobs)
    out = Outcome()
    ok_nonneg = ok_sandwich = ok_k = True
    for spec, rec, rep in results:
        out.records.append({"case": spec, **rec})
        ok_nonneg &= rep.entropy >= -TOL and rep.ent_beta >= -TOL
        ok_sandwich &= rep.ent_beta <= rep.entropy + TOL
        ok_k &= rep.k_beta <= rep.k_energy + TOL
        out.summary.append(f"{spec}: I={rep.i_energy:.8g} Ent={rep.entropy:.8g} Ent^beta={rep.ent_beta:.8g} K={rep.k_energy:.8g} K^beta={rep.k_beta:.8g}")
    out.checks += [
        Check("entropies_nonnegative", ok_nonneg, "Ent, Ent^beta >= -1e-6"),
        Check("ent_beta_below_entropy", ok_sandwich, "Ent^beta <= Ent + 1e-6"),
        Check("k_beta_below_k", ok_k, "K^beta <= K + 1e-6"),
    ]
    return out


# ---------------------------------------------------------------------------
# ray-slope
# ---------------------------------------------------------------------------


def run_ray_slope(cfg: ExperimentConfig, jobs: int = 1, strict: bool = False) -> Outcome:
    from .divisorial import df_toric

    g = parse_ray_spec(cfg, "ray", cfg.get("ray"))
    t_max = cfg.get_float("t_max", minimum=10.0)
    n = cfg.get_int("n_samples", minimum=4)
    model = cfg.get("tail_model")
    rb = cfg.get_float("residual_bound", positive=True)
    ray = GeodesicRay(g, grid=ray_grid([g], t_max, spacing=cfg.get_float("spacing", positive=True)), t_max=t_max)
    betas = sorted(float(b) for b in cfg.get_betas())
    out = Outcome()
    slopes: dict[str, SlopeEstimate] = {}
    for name in cfg.get_list("functionals"):
        beta_list = betas if name in ("Ent_beta", "K_beta") else [None]
        for b in beta_list:
            key = name if b is None else f"{name}@{b:g}"
            est, unstable = _slope(lambda: radial_slope(name, ray, t_max, n, beta=b, model=model, residual_bound=rb), strict)
            slopes[key] = est
            out.records.append({"case": key, "ray": str(g), **_slope_record(est, unstable)})
            t = np.asarray(est.t_values)
            out.series.append(
                Series(
                    f"t_vs_{key.replace('@', '_beta')}_over_t",
                    tuple(t),
                    tuple(np.asarray(est.f_values) / t),
                    "t",
                    "F(u_t)/t",
                    "ray_slopes",
                    label=name if b is None else f"{name}, beta={b:g}",
                )
            )
    i_fit = slopes.get("I")
    if i_fit is not None:
        out.checks.append(Check("geodesic_affinity", i_fit.residual_rms <= TOL * t_max, f"I(u_t) fit residual {i_fit.residual_rms:.2e} <= {TOL * t_max:.1e}"))
    kb = [(b, slopes[f"K_beta@{b:g}"]) for b in betas if f"K_beta@{b:g}" in slopes]
    if len(kb) >= 2:
        ok = all(e2.value >= e1.value - e1.combined_stderr(e2) for (_, e1), (_, e2) in zip(kb, kb[1:]))
        out.checks.append(Check("k_beta_nondecreasing", ok, "K^beta-slope nondecreasing in beta within combined stderr"))
    dfv = df_toric(g)
    out.records.append({"case": "df_toric", "ray": str(g), **_frac(dfv)})
    if "K" in slopes:
        out.summary.append(f"K-slope {slopes['K'].value:.6g} vs DF {dfv} ({float(dfv):.6g})")
    return out


# ---------------------------------------------------------------------------
# l-beta-compare
# ---------------------------------------------------------------------------


def run_l_beta_compare(cfg: ExperimentConfig, jobs: int = 1, strict: bool = False) -> Outcome:
    gu = parse_ray_spec(cfg, "u_ray", cfg.get("u_ray"))
    gv = parse_ray_spec(cfg, "v_ray", cfg.get("v_ray"))
    t_max = cfg.get_float("t_max", minimum=10.0)
    n = cfg.get_int("n_samples", minimum=4)
    tol = cfg.get_float("tolerance", positive=True)
    model = cfg.get("tail_model")
    rb = cfg.get_float("residual_bound", positive=True)
    grid = ray_grid([gu, gv], t_max, spacing=cfg.get_float("spacing", positive=True))
    u_ray, v_ray = GeodesicRay(gu, grid=grid), GeodesicRay(gv, grid=grid)
    snc = SncModelData.parse(cfg.get("snc"))
    out = Outcome()
    xs, num, exact = [], [], []
    for b in cfg.get_betas():
        est, unstable = _slope(lambda: l_beta_numeric(v_ray, u_ray, float(b), t_max, n, model=model, residual_bound=rb), strict)
        val, argmin = l_beta_snc(snc, b)
        err = abs(est.value - float(val))
        bound = tol if val == 0 else tol * abs(float(val))
        out.records.append(
            {
                "case": f"beta={b}",
                "numeric": _slope_record(est, unstable),
                "snc": _frac(val),
                "argmin": list(argmin),
                "abs_error": err,
                "bound": bound,
            }
        )
        out.checks.append(Check(f"l_beta_match@{b}", err <= bound, f"|numeric - exact| = {err:.3g} <= {bound:.3g}"))
        xs.append(float(b))
        num.append(est.value)
        exact.append(float(val))
        out.summary.append(f"beta={b}: L^beta numeric {est.value:.6g} +- {est.stderr:.1e}, snc {val}")
    out.series += [
        Series("beta_vs_l_beta_numeric", tuple(xs), tuple(num), "beta", "L^beta", "l_beta", label="numeric tail slope"),
        Series("beta_vs_l_beta_snc", tuple(xs), tuple(exact), "beta", "L^beta", "l_beta", label="exact min formula"),
    ]
    return out


# ---------------------------------------------------------------------------
# stability-scan
# ---------------------------------------------------------------------------


def run_stability_scan(cfg: ExperimentConfig, jobs: int = 1, strict: bool = False) -> Outcome:
    beta = float(cfg.get_betas("beta")[0])
    gamma = cfg.get_float("gamma", positive=True)
    t_max = cfg.get_float("t_max", minimum=10.0)
    n = cfg.get_int("n_samples", minimum=4)
    model = cfg.get("tail_model")
    rb = cfg.get_float("residual_bound", positive=True)
    spacing = cfg.get_float("spacing", positive=True)
    out = Outcome()
    for spec in cfg.get_list("rays"):
        g = parse_ray_spec(cfg, "rays", spec)
        ray = GeodesicRay(g, grid=ray_grid([g], t_max, spacing=spacing), t_max=t_max)
        kb, u1 = _slope(lambda: radial_slope("K_beta", ray, t_max, n, beta=beta, model=model, residual_bound=rb), strict)
        js, u2 = _slope(lambda: radial_slope("J", ray, t_max, n, model=model, residual_bound=rb), strict)
        sat = kb.value >= gamma * js.value
        out.records.append(
            {
                "case": spec,
                "ray": str(g),
                "k_beta_slope": _slope_record(kb, u1),
                "j_slope": _slope_record(js, u2),
                "gamma": gamma,
                "satisfied": sat,
            }
        )
        out.summary.append(f"{spec}: K^beta {kb.value:.6g} +- {kb.stderr:.1e}, J {js.value:.6g}, K^beta >= gamma J: {sat}")
    return out


# ---------------------------------------------------------------------------
# snc-eval
# ---------------------------------------------------------------------------


def run_snc_eval(cfg: ExperimentConfig, jobs: int = 1, strict: bool = False) -> Outcome:
    snc = SncModelData.parse(cfg.get("snc"))
    out = Outcome()
    agree = True
    xs, ys = [], []
    for b in cfg.get_betas():
        val, argmin = l_beta_snc(snc, b)
        lct = lct_shift(snc, b)
        agree &= lct == val
        out.records.append({"case": f"beta={b}", "l_beta": _frac(val), "lct_shift": _frac(lct), "argmin": list(argmin)})
        out.summary.append(f"L^beta(beta={b}) = {val}")
        xs.append(float(b))
        ys.append(float(val))
    out.checks.append(Check("l_beta_equals_lct_shift", agree, "exact equality of the min formula and lct - 1"))
    out.series.append(Series("beta_vs_l_beta_snc", tuple(xs), tuple(ys), "beta", "L^beta", "l_beta"))
    return out


# ---------------------------------------------------------------------------
# invariant-suite
# ---------------------------------------------------------------------------


def _suite_case(args):
    cfg, index, betas = args
    return _in_case(f"corpus#{index}", _suite_case_body, cfg, index, betas)


def _suite_case_body(cfg, index, betas):
    grid = _grid(cfg)
    seeds = corpus(grid, cfg.get_int("seed"), cfg.get_int("n_harmonic", minimum=0), cfg.get_int("n_profile", minimum=0))
    sd = seeds[index]
    u = sd.potential
    zero = ReducedPotential.zeros(grid)
    ent = entropy(u)
    ebs, worst = [], {"translation": 0.0, "comparison": 0.0, "sandwich": 0.0, "pc0_left": -math.inf}
    shift = 0.731
    # a potential below u that differs from it by more than a constant
    lower = rooftop_envelope(u, ReducedPotential.constant(grid, float(np.mean(u.values[np.abs(grid.samples) < 5]))))
    for b in betas:
        res = quantize(u, b)
        ub = res.u_beta
        eb = ent_beta(u, b, result=res)
        ebs.append(eb)
        sh = quantize(u.shifted(shift), b).u_beta
        worst["translation"] = max(worst["translation"], float(np.max(np.abs(sh.values - shift - ub.values))))
        lo = quantize(lower, b).u_beta
        worst["comparison"] = max(worst["comparison"], float(np.max(lo.values - ub.values)))
        worst["sandwich"] = max(worst["sandwich"], entropy(ub) - eb, eb - ent)
        worst["pc0_left"] = max(worst["pc0_left"], eb / b - d1(ub, u))
    mono = max(e1 - e2 for e1, e2 in zip(ebs, ebs[1:])) if len(ebs) > 1 else 0.0
    ratio = max(e2 / b2 - e1 / b1 for e1, b1, e2, b2 in zip(ebs, betas, ebs[1:], betas[1:])) if len(ebs) > 1 else 0.0
    return {
        "case": sd.name,
        "family": sd.family,
        "entropy": _num(ent),
        "ent_beta": dict(zip([f"{b:g}" for b in betas], ebs)),
        "d1_zero_u": d1(zero, u),
        "energy_I": energy_I(u),
        "k_energy": _num(k_energy(u)),
        "k_beta_top": k_beta(u, betas[-1]),
        "worst_translation": worst["translation"],
        "worst_comparison": worst["comparison"],
        "worst_sandwich": worst["sandwich"],
        "worst_pc0_left": worst["pc0_left"],
        "worst_monotone": mono,
        "worst_ratio": ratio,
    }


def run_invariant_suite(cfg: ExperimentConfig, jobs: int = 1, strict: bool = False) -> Outcome:
    betas = sorted(float(b) for b in cfg.get_betas())
    n_total = cfg.get_int("n_harmonic", minimum=0) + cfg.get_int("n_profile", minimum=0)
    tasks = [(cfg, i, betas) for i in range(n_total)]
    recs = _map(_suite_case, tasks, jobs)
    out = Outcome(records=list(recs))
    tol2 = 2 * TOL_NEWTON

    def worst(key):
        return max((r[key] for r in recs), default=0.0)

    out.checks += [
        Check("translation_equivariance", worst("worst_translation") <= tol2, f"max {worst('worst_translation'):.2e} <= {tol2:.0e}"),
        Check("comparison_principle", worst("worst_comparison") <= tol2, f"max {worst('worst_comparison'):.2e} <= {tol2:.0e}"),
        Check("sandwich", worst("worst_sandwich") <= TOL, f"max violation {worst('worst_sandwich'):.2e} <= 1e-6"),
        Check("monotone_in_beta", worst("worst_monotone") <= 1e-8, f"max decrease {worst('worst_monotone'):.2e} <= 1e-8"),
        Check("ratio_in_beta", worst("worst_ratio") <= 1e-8, f"max increase of Ent^beta/beta {worst('worst_ratio'):.2e} <= 1e-8"),
        Check("pc0_left", worst("worst_pc0_left") <= 1e-8, f"max of Ent^beta/beta - d1 {worst('worst_pc0_left'):.2e} <= 1e-8"),
    ]
    for r in recs:
        vals = [r["ent_beta"][f"{b:g}"] for b in betas]
        out.series.append(Series(f"beta_vs_ent_beta_{r['case']}", tuple(betas), tuple(vals), "beta", "Ent^beta(u)", "corpus_ent_beta", True))
    out.summary.append(f"{len(recs)} corpus potentials, betas {', '.join(f'{b:g}' for b in betas)}")
    return out


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves task order, so the merged output is deterministic
        return list(pool.map(fn, tasks))


RUNNERS: dict[str, Callable[..., Outcome]] = {
    "quantize-sweep": run_quantize_sweep,
    "functional-report": run_functional_report,
    "ray-slope": run_ray_slope,
    "l-beta-compare": run_l_beta_compare,
    "stability-scan": run_stability_scan,
    "snc-eval": run_snc_eval,
    "invariant-suite": run_invariant_suite,
}


__all__ = ["Check", "Outcome", "RUNNERS", "Series", "build_potential"]
