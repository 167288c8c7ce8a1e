"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear in the
"acceptance criteria" section of the terminal summary.  Running the file
directly (``python3 tests/test_acceptance.py``) prints the same lines.

Every criterion is checked as stated.  Criterion 11 asks for a product
configuration to have a K^beta slope within stderr of 0.  On this model the
slope is about -1/(2 beta), so that sub-check fails at the default window;
the failure is reported rather than hidden.
"""

from __future__ import annotations

import math
import random
import time
from fractions import Fraction as F
from functools import lru_cache

import numpy as np
import pytest

from kbeta.divisorial import SncModelData, df_toric, dnc_config, dnc_snc, l_beta_snc, lct_shift
from kbeta.functionals import d1, ent_beta, entropy
from kbeta.quantizer import joint_convexity, quantize, quantized_family
from kbeta.rays import (
    GeodesicRay,
    RayDirection,
    ToricTestConfig,
    chordal_d1,
    l_beta_numeric,
    radial_ent_beta_lower_probe,
    radial_slope,
    ray_grid,
)
from kbeta.reduction_geometry import ReducedPotential, SGrid, rooftop_envelope
from kbeta.seeds import corpus, seed_bump, segment_directions

# ---- pinned tolerances ------------------------------------------------------
TOL_NEWTON = 1e-10
TOL_EQUIVARIANCE = 2 * TOL_NEWTON
TOL_SANDWICH = 1e-6
TOL_MONOTONE = 1e-8
TOL_PC0 = 1e-8
ENT_GAP_512 = 0.01
HOLDER_MIN_SLOPE = 0.45
HOLDER_MIN_PAIRS = 50
TOL_PSH = 1e-6
L_BETA_REL = 0.05
L_BETA_ABS = 0.05
K_BETA_REL = 0.05
DF_REL = 0.05
CONT_MIN_SLOPE = 0.45
J_MIN = 0.01
RUNTIME_1 = 60.0
RUNTIME_6 = 120.0
RUNTIME_10 = 5.0
RUNTIME_TOTAL = 600.0

BETAS = (1.0, 8.0, 32.0, 128.0, 512.0)
T_MAX = 50.0
N_SAMPLES = 9

RAYS = {
    "dnc": ToricTestConfig.parse("breakpoints = [1/2]; slopes = [0, 1]"),
    "abs": ToricTestConfig.parse("breakpoints = [1/2]; slopes = [-1, 1]; offset = 1/2"),
    "three": ToricTestConfig.parse("breakpoints = [1/4, 3/4]; slopes = [0, 1, 2]"),
}

LINES: list[str] = []
ELAPSED: dict[int, float] = {}


def report(log, number: int, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] #{number:<2d} {detail}"
    LINES.append(line)
    if log is not None:
        log.append(line)
    print(line)


def info(log, text: str) -> None:
    line = f"[INFO]     {text}"
    LINES.append(line)
    if log is not None:
        log.append(line)
    print(line)


@lru_cache(maxsize=None)
def grid() -> SGrid:
    return SGrid.symmetric(40.0, 2001)


@lru_cache(maxsize=None)
def seeds():
    return tuple(corpus(grid(), seed=0))


@lru_cache(maxsize=None)
def ladder():
    """Per corpus potential: quantized solutions along the beta ladder."""
    out = {}
    for sd in seeds():
        out[sd.name] = {b: quantize(sd.potential, b) for b in BETAS}
    return out


# ---------------------------------------------------------------------------
# 1. quantization identities
# ---------------------------------------------------------------------------
def check_1(log=None):
    start = time.perf_counter()
    pool = seeds()
    sols = ladder()
    worst = dict(translation=0.0, comparison=0.0, sandwich=0.0, monotone=0.0, ratio=0.0)
    for k, sd in enumerate(pool):
        u = sd.potential
        # a second admissible potential below u
        v = rooftop_envelope(u, pool[(k + 5) % len(pool)].potential.shifted(0.1))
        ent_u = entropy(u)
        eb = []
        for b in BETAS:
            res = sols[sd.name][b]
            ub = res.u_beta.values
            shifted = quantize(u.shifted(3.7), b).u_beta.values
            worst["translation"] = max(worst["translation"], float(np.max(np.abs(shifted - 3.7 - ub))))
            vb = quantize(v, b).u_beta.values
            worst["comparison"] = max(worst["comparison"], float(np.max(vb - ub)))
            e = ent_beta(u, b, result=res)
            eb.append(e)
            worst["sandwich"] = max(worst["sandwich"], entropy(res.u_beta) - e, e - ent_u)
        for i in range(len(BETAS) - 1):
            worst["monotone"] = max(worst["monotone"], eb[i] - eb[i + 1])
            worst["ratio"] = max(worst["ratio"], eb[i + 1] / BETAS[i + 1] - eb[i] / BETAS[i])
    elapsed = time.perf_counter() - start
    ELAPSED[1] = elapsed
    ok = (
        len(pool) >= 20
        and worst["translation"] <= TOL_EQUIVARIANCE
        and worst["comparison"] <= TOL_EQUIVARIANCE
        and worst["sandwich"] <= TOL_SANDWICH
        and worst["monotone"] <= TOL_MONOTONE
        and worst["ratio"] <= TOL_MONOTONE
        and elapsed <= RUNTIME_1
    )
    report(
        log,
        1,
        ok,
        f"quantization identities on {len(pool)} potentials x {len(BETAS)} betas: "
        f"translation {worst['translation']:.1e}, comparison {worst['comparison']:.1e} (<= {TOL_EQUIVARIANCE:g}); "
        f"sandwich {worst['sandwich']:.1e} (<= {TOL_SANDWICH:g}); monotone {worst['monotone']:.1e}, "
        f"ratio {worst['ratio']:.1e} (<= {TOL_MONOTONE:g}); {elapsed:.1f}s (<= {RUNTIME_1:g}s)",
    )
    return ok


# ---------------------------------------------------------------------------
# 2. convergence u^beta -> u
# ---------------------------------------------------------------------------
def check_2(log=None):
    sols = ladder()
    smooth_gaps, rough_gaps, decreasing = [], [], True
    for sd in seeds():
        u = sd.potential
        dists = [d1(sols[sd.name][b].u_beta, u) for b in BETAS]
        decreasing &= all(y < x for x, y in zip(dists, dists[1:]))
        gap = (entropy(u) - ent_beta(u, 512.0, result=sols[sd.name][512.0])) / entropy(u)
        (smooth_gaps if sd.smooth else rough_gaps).append(gap)
    bump = seed_bump(grid())
    bump_gap = (entropy(bump) - ent_beta(bump, 512.0)) / entropy(bump)
    smooth_gaps.append(bump_gap)
    ok = decreasing and max(smooth_gaps) <= ENT_GAP_512
    report(
        log,
        2,
        ok,
        f"d1(u^beta, u) decreasing on all {len(seeds())} potentials: {decreasing}; "
        f"worst Ent gap at beta=512 over {len(smooth_gaps)} smooth potentials {max(smooth_gaps):.3%} (<= 1%)",
    )
    info(
        log,
        f"#2 profile family (many Laplace modes) gap at beta=512: {min(rough_gaps):.2%} .. {max(rough_gaps):.2%} "
        "(a mode with eigenvalue l(l+1) has gap l(l+1)/(beta + l(l+1)))",
    )
    return ok


# ---------------------------------------------------------------------------
# 3. PC0 sandwich
# ---------------------------------------------------------------------------
def check_3(log=None):
    sols = ladder()
    zero = ReducedPotential.zeros(grid())
    cases = violations = 0
    c_fit = 0.0
    for sd in seeds():
        u = sd.potential
        assert u.sup() <= 0
        norm = d1(zero, u)
        for b in BETAS:
            res = sols[sd.name][b]
            e = ent_beta(u, b, result=res)
            dist = d1(res.u_beta, u)
            cases += 1
            if e / b > dist + TOL_PC0:
                violations += 1
            c_fit = max(c_fit, (b * dist - e) / (math.log(norm + 2) + math.log(b)))
    ok = violations == 0 and math.isfinite(c_fit)
    report(
        log,
        3,
        ok,
        f"(1/beta) Ent^beta <= d1(u^beta, u) + {TOL_PC0:g} on {cases - violations}/{cases} cases; "
        f"upper bound d1 <= (Ent^beta + C log(d1(0,u)+2) + C log beta)/beta holds with fitted C = {c_fit:.4f}",
    )
    return ok


# ---------------------------------------------------------------------------
# 4. Hoelder stability of quantization
# ---------------------------------------------------------------------------
def check_4(log=None):
    pool = seeds()
    zero = ReducedPotential.zeros(grid())
    rows = []
    beta = 8.0
    for i in range(10):
        u0 = pool[i].potential
        u1 = pool[(i + 7) % len(pool)].potential
        a = ladder()[pool[i].name][beta].u_beta
        for lam in (0.5, 0.2, 0.05, 0.01, 0.002):
            v = ReducedPotential(grid(), (1 - lam) * u0.values + lam * u1.values)
            rows.append((d1(u0, v), d1(a, quantize(v, beta).u_beta), max(d1(zero, u0), d1(zero, v))))
    rows = np.array(rows)
    c_fit = float(np.max(rows[:, 1] / np.sqrt(rows[:, 0] * rows[:, 2])))
    small = rows[rows[:, 0] < np.median(rows[:, 0])]
    slope = float(np.polyfit(np.log(small[:, 0]), np.log(small[:, 1]), 1)[0])
    ok = len(rows) >= HOLDER_MIN_PAIRS and slope >= HOLDER_MIN_SLOPE
    report(
        log,
        4,
        ok,
        f"Hoelder bound on {len(rows)} pairs (beta=8) with fitted C = {c_fit:.3f}; "
        f"small-distance log-log slope {slope:.3f} (>= {HOLDER_MIN_SLOPE})",
    )
    return ok


# ---------------------------------------------------------------------------
# 5. subgeodesic preservation
# ---------------------------------------------------------------------------
def check_5(log=None):
    times = np.linspace(0.0, 1.0, 21)
    worst = math.inf
    for direction in segment_directions(0, 5):
        seg = [GeodesicRay(direction, grid=grid()).potential(t) for t in times]
        for beta in (4.0, 16.0, 64.0):
            fam = quantized_family(seg, beta, times)
            worst = min(worst, joint_convexity(times, [r.u_beta for r in fam]).min_directional)
    ok = worst >= -TOL_PSH
    report(log, 5, ok, f"joint (s,t) second differences over 5 segments x 3 betas: min {worst:.2e} (>= -{TOL_PSH:g})")
    return ok


# ---------------------------------------------------------------------------
# 6. L^beta: numeric slope vs min formula
# ---------------------------------------------------------------------------
def check_6(log=None):
    start = time.perf_counter()
    u = GeodesicRay(RAYS["dnc"], t_max=T_MAX)
    trivial = GeodesicRay(ToricTestConfig.affine(0), grid=u.grid)
    rows = []
    for beta in (2, 4):
        exact = l_beta_snc(dnc_snc(), beta)[0]
        num = l_beta_numeric(trivial, u, float(beta), T_MAX, N_SAMPLES).value
        rows.append(("dnc", beta, exact, num))
        num0 = l_beta_numeric(trivial, GeodesicRay(ToricTestConfig.affine(0), grid=u.grid), float(beta), T_MAX).value
        rows.append(("trivial", beta, l_beta_snc(SncModelData((1,), (0,), (0,), (0,)), beta)[0], num0))
    ok_rows = []
    for _, _, exact, num in rows:
        if exact == 0:
            ok_rows.append(abs(num) <= L_BETA_ABS)
        else:
            ok_rows.append(abs(num - float(exact)) <= L_BETA_REL * abs(float(exact)))
    elapsed = time.perf_counter() - start
    ELAPSED[6] = elapsed
    ok = all(ok_rows) and elapsed <= RUNTIME_6
    detail = ", ".join(f"{n} beta={b}: {num:.4f} vs {exact}" for n, b, exact, num in rows)
    report(log, 6, ok, f"L^beta numeric vs exact ({detail}); {elapsed:.1f}s (<= {RUNTIME_6:g}s)")
    return ok


# ---------------------------------------------------------------------------
# 7. radial quantization limit
# ---------------------------------------------------------------------------
def check_7(log=None):
    ok = True
    parts = []
    for name, g in RAYS.items():
        ray = GeodesicRay(g, t_max=T_MAX)
        ks = [radial_slope("K_beta", ray, T_MAX, N_SAMPLES, beta=b) for b in (8.0, 32.0, 128.0)]
        k = radial_slope("K", ray, T_MAX, N_SAMPLES)
        df = float(df_toric(g))
        nondecreasing = all(y.value >= x.value - x.combined_stderr(y) for x, y in zip(ks, ks[1:]))
        close = abs(ks[-1].value - k.value) <= K_BETA_REL * abs(k.value)
        df_ok = abs(k.value - df) <= DF_REL * df
        ok &= nondecreasing and close and df_ok
        parts.append(
            f"{name}: K^beta {ks[0].value:.4f}/{ks[1].value:.4f}/{ks[2].value:.4f}, K {k.value:.4f}, DF {df_toric(g)}"
        )
    report(log, 7, ok, "K^beta slopes at beta=8/32/128 nondecreasing, within 5% of K, K within 5% of DF: " + "; ".join(parts))
    return ok


# ---------------------------------------------------------------------------
# 8. one-sided radial sup formula
# ---------------------------------------------------------------------------
def check_8(log=None):
    ok = True
    worst = -math.inf
    count = 0
    for name, g in RAYS.items():
        u = GeodesicRay(g, t_max=T_MAX)
        for beta in (4.0, 16.0):
            scales = (F(0), F(1, 2), 1 - 2 / F(int(beta)), 1 - 1 / F(int(beta)), F(1))
            trials = [GeodesicRay(g.scaled(k), grid=u.grid) for k in scales]
            ent = radial_slope("Ent_beta", u, T_MAX, N_SAMPLES, beta=beta, residual_bound=None)
            for probe in radial_ent_beta_lower_probe(u, beta, trials, T_MAX, N_SAMPLES):
                count += 1
                margin = probe.value - (ent.value + probe.combined_stderr(ent))
                worst = max(worst, margin)
                ok &= margin <= 0
    report(log, 8, ok, f"{count} probe values vs Ent^beta slope + stderr (3 rays x beta 4, 16): worst margin {worst:.4f} (<= 0)")
    return ok


# ---------------------------------------------------------------------------
# 9. chordal continuity of the radial beta-entropy
# ---------------------------------------------------------------------------
def perturbed_dnc(eps: F) -> ToricTestConfig:
    """``max(0, x - 1/2) + 4 eps |x - 1/2|``: its chordal distance to the base ray is ``eps``."""
    return ToricTestConfig((F(1, 2),), (-4 * eps, 1 + 4 * eps), 2 * eps)


def check_9(log=None):
    beta = 8.0
    base_cfg = RAYS["dnc"]
    epsilons = (F(1, 25), F(1, 100), F(1, 400))
    configs = [base_cfg] + [perturbed_dnc(e) for e in epsilons]
    g = ray_grid([RayDirection.from_config(c) for c in configs], T_MAX)
    base = GeodesicRay(base_cfg, grid=g)
    s0 = radial_slope("Ent_beta", base, T_MAX, N_SAMPLES, beta=beta)
    deltas, chords = [], []
    for eps in epsilons:
        ray = GeodesicRay(perturbed_dnc(eps), grid=g)
        chords.append(chordal_d1(base, ray, T_MAX).value)
        deltas.append(abs(radial_slope("Ent_beta", ray, T_MAX, N_SAMPLES, beta=beta).value - s0.value))
    eps_f = np.array([float(e) for e in epsilons])
    c_fit = float(np.max(np.array(deltas) / np.sqrt(eps_f)))
    slope = float(np.polyfit(np.log(eps_f), np.log(deltas), 1)[0])
    ok = slope >= CONT_MIN_SLOPE
    report(
        log,
        9,
        ok,
        f"|dEnt^beta slope| at eps = 0.04/0.01/0.0025: {deltas[0]:.2e}/{deltas[1]:.2e}/{deltas[2]:.2e}, "
        f"fitted C = {c_fit:.3f}, log-log slope {slope:.2f} (>= {CONT_MIN_SLOPE})",
    )
    info(log, f"#9 measured chordal distances {chords[0]:.5f}/{chords[1]:.5f}/{chords[2]:.6f}")
    return ok


# ---------------------------------------------------------------------------
# 10. exact arithmetic suite
# ---------------------------------------------------------------------------
def _random_fraction(rng: random.Random, lo: int = -3, hi: int = 3, den: int = 12) -> F:
    q = rng.randint(1, den)
    return F(rng.randint(lo * q, hi * q), q)


def check_10(log=None):
    start = time.perf_counter()
    rng = random.Random(0)
    equal = concave = df_ok = 0
    for _ in range(100):
        k = rng.randint(1, 5)
        data = SncModelData(
            tuple(rng.randint(1, 4) for _ in range(k)),
            tuple(_random_fraction(rng) for _ in range(k)),
            tuple(_random_fraction(rng) for _ in range(k)),
            tuple(_random_fraction(rng) for _ in range(k)),
        )
        beta = abs(_random_fraction(rng, 0, 8)) + F(1, 16)
        equal += lct_shift(data, beta) == l_beta_snc(data, beta)[0]
        bs = sorted({abs(_random_fraction(rng, 0, 16)) + F(1, 16) for _ in range(5)})
        concave += all(
            l_beta_snc(data, (a + b) / 2)[0] >= (l_beta_snc(data, a)[0] + l_beta_snc(data, b)[0]) / 2
            for a, b in zip(bs, bs[1:])
        )
        nb = rng.randint(0, 3)
        bps = sorted({F(rng.randint(1, 15), 16) for _ in range(nb)})
        if rng.random() < 0.2:
            bps = []
        slopes = [_random_fraction(rng)]
        for _ in bps:
            slopes.append(slopes[-1] + F(rng.randint(1, 16), 8))
        g = ToricTestConfig(tuple(bps), tuple(slopes), _random_fraction(rng))
        df = df_toric(g)
        df_ok += df >= 0 and ((df == 0) == g.is_affine)
    elapsed = time.perf_counter() - start
    ELAPSED[10] = elapsed
    ok = equal == 100 and concave == 100 and df_ok == 100 and elapsed <= RUNTIME_10
    report(
        log,
        10,
        ok,
        f"exact: lct_shift == l_beta_snc {equal}/100, midpoint concavity {concave}/100, "
        f"df >= 0 with equality iff affine {df_ok}/100; {elapsed:.2f}s (<= {RUNTIME_10:g}s)",
    )
    return ok


# ---------------------------------------------------------------------------
# 11. product configurations
# ---------------------------------------------------------------------------
def check_11(log=None):
    products = {"x": ToricTestConfig.affine(1), "(1-x)/2": ToricTestConfig.affine(F(-1, 2), F(1, 2))}
    near_zero = j_positive = violated = True
    parts = []
    for name, g in products.items():
        ray = GeodesicRay(g, t_max=T_MAX)
        j = radial_slope("J", ray, T_MAX, N_SAMPLES)
        for beta in (8.0, 128.0):
            kb = radial_slope("K_beta", ray, T_MAX, N_SAMPLES, beta=beta)
            near_zero &= abs(kb.value) <= kb.stderr
            j_positive &= j.value > J_MIN
            # K^beta <= 0 < gamma J for every gamma > 0
            violated &= kb.value <= kb.stderr and j.value > 0
            parts.append(f"g={name} beta={beta:g}: K^beta {kb.value:.5f} +- {kb.stderr:.1e}, J {j.value:.4f}")
    ok = near_zero and j_positive and violated
    report(
        log,
        11,
        ok,
        f"product rays: K^beta within stderr of 0: {near_zero}; J > {J_MIN}: {j_positive}; "
        f"violated for every gamma > 0: {violated} (" + "; ".join(parts) + ")",
    )
    if not near_zero:
        info(log, "#11 the K^beta slope of a product ray is negative and of order 1/beta (about -1/(2 beta) for g = x), not 0")
    return ok


CHECKS = {n: globals()[f"check_{n}"] for n in range(1, 12)}


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, acceptance_log):
    start = time.perf_counter()
    ok = CHECKS[number](acceptance_log)
    ELAPSED.setdefault(number, time.perf_counter() - start)
    assert ok, LINES[-1]


def test_total_runtime(acceptance_log):
    total = sum(ELAPSED.values())
    ok = total <= RUNTIME_TOTAL
    line = f"[{'PASS' if ok else 'FAIL'}] acceptance runtime {total:.1f}s (<= {RUNTIME_TOTAL:g}s)"
    acceptance_log.append(line)
    print(line)
    assert ok


if __name__ == "__main__":
    t0 = time.perf_counter()
    results = [CHECKS[n]() for n in sorted(CHECKS)]
    print(f"{sum(results)}/{len(results)} criteria passed in {time.perf_counter() - t0:.1f}s")
