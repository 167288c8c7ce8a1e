"""Toric geodesic rays, radial slopes, L^beta and the stability probe.

A ray is described on the symplectic side by ``phi_t = phi0 + t g`` where
``phi0(x) = x log x + (1-x) log(1-x)`` and ``g`` is convex on [0, 1].  The
potential is recovered by conjugation, ``psi_t(s) = sup_x (x s - phi_t(x))``,
and ``u_t = psi_t - psi0``.

For piecewise-linear ``g`` the conjugate is available in closed form: on a
piece ``g = m x + c`` over ``[x_lo, x_hi]`` the maximizer is the clamp of
``expit(s - t m)`` to the piece, and when it is interior the value is
``psi0(s - t m) - t c``.  An optional smooth polynomial part is handled by a
vectorized bisection for the stationary point in logit coordinates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import expit

from .errors import LegendreFailure, NonConvex, SlopeUnstable
from .functionals import (
    d1,
    energy_I,
    ent_beta,
    entropy,
    j_energy,
    mean_value,
    twisted_energy,
)
from .reduction_geometry import (
    ReducedPotential,
    SGrid,
    SymplecticProfile,
    background_psi0,
    phi0,
    require_same_grid,
    softplus,
)

DEFAULT_T_MAX = 50.0
DEFAULT_SAMPLES = 9
DEFAULT_SPACING = 0.04
DEFAULT_MARGIN = 40.0
DEFAULT_RESIDUAL_BOUND = 0.05
_BISECTION_STEPS = 80
_LOGIT_CLIP = 740.0


# ---------------------------------------------------------------------------
# Exact rational test-configuration data
# ---------------------------------------------------------------------------


def parse_rational_list(text: str) -> tuple[Fraction, ...]:
    """Parse ``[1/2, 3, -0.25]`` into exact fractions."""
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ValueError(f"expected a bracketed list, got '{text}'")
    items = [tok.strip() for tok in body[1:-1].split(",") if tok.strip()]
    try:
        return tuple(Fraction(tok) for tok in items)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad rational literal in '{text}'") from exc


def parse_assignments(text: str) -> dict[str, str]:
    """Split ``key = value; key = value`` (also accepts newlines)."""
    out: dict[str, str] = {}
    for chunk in re.split(r"[;\n]", text):
        if not chunk.strip():
            continue
        if "=" not in chunk:
            raise ValueError(f"expected 'key = value', got '{chunk.strip()}'")
        key, val = chunk.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _fmt_list(vals: Sequence[Fraction]) -> str:
    return "[" + ", ".join(str(v) for v in vals) + "]"


@dataclass(frozen=True)
class ToricTestConfig:
    """Convex piecewise-linear rational ``g`` on [0, 1].

    ``slopes[i]`` is the slope on the i-th piece, ``breakpoints`` separate the
    pieces and ``offset`` is ``g(0)``.
    """

    breakpoints: tuple[Fraction, ...]
    slopes: tuple[Fraction, ...]
    offset: Fraction = Fraction(0)

    def __post_init__(self):
        bps = tuple(Fraction(b) for b in self.breakpoints)
        sl = tuple(Fraction(m) for m in self.slopes)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "slopes", sl)
        object.__setattr__(self, "offset", Fraction(self.offset))
        if len(sl) != len(bps) + 1:
            raise ValueError("need exactly one more slope than breakpoints")
        if any(not (0 < b < 1) for b in bps) or any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing inside (0, 1)")
        if any(m2 <= m1 for m1, m2 in zip(sl, sl[1:])):
            raise NonConvex(f"slopes {_fmt_list(sl)} are not strictly increasing")

    # construction -----------------------------------------------------------
    @classmethod
    def parse(cls, text: str) -> "ToricTestConfig":
        kv = parse_assignments(text)
        unknown = set(kv) - {"breakpoints", "slopes", "offset"}
        if unknown:
            raise ValueError(f"unknown keys {sorted(unknown)}")
        if "slopes" not in kv:
            raise ValueError("missing 'slopes'")
        bps = parse_rational_list(kv.get("breakpoints", "[]"))
        sl = parse_rational_list(kv["slopes"])
        off = Fraction(kv["offset"]) if "offset" in kv else Fraction(0)
        return cls(bps, sl, off)

    @classmethod
    def affine(cls, slope, offset=0) -> "ToricTestConfig":
        return cls((), (Fraction(slope),), Fraction(offset))

    def __str__(self) -> str:
        text = f"breakpoints = {_fmt_list(self.breakpoints)}; slopes = {_fmt_list(self.slopes)}"
        if self.offset:
            text += f"; offset = {self.offset}"
        return text

    # exact evaluation -------------------------------------------------------
    @property
    def nodes(self) -> tuple[Fraction, ...]:
        return (Fraction(0),) + self.breakpoints + (Fraction(1),)

    def node_values(self) -> tuple[Fraction, ...]:
        vals = [self.offset]
        for m, (a, b) in zip(self.slopes, zip(self.nodes, self.nodes[1:])):
            vals.append(vals[-1] + m * (b - a))
        return tuple(vals)

    def value(self, x) -> Fraction:
        x = Fraction(x)
        if not 0 <= x <= 1:
            raise ValueError("g is defined on [0, 1]")
        nodes, vals = self.nodes, self.node_values()
        for i, m in enumerate(self.slopes):
            if x <= nodes[i + 1]:
                return vals[i] + m * (x - nodes[i])
        return vals[-1]

    def integral(self) -> Fraction:
        nodes, vals = self.nodes, self.node_values()
        return sum(((b - a) * (va + vb) / 2 for a, b, va, vb in zip(nodes, nodes[1:], vals, vals[1:])), Fraction(0))

    def min_value(self) -> Fraction:
        return min(self.node_values())

    def max_value(self) -> Fraction:
        return max(self.node_values())

    @property
    def is_affine(self) -> bool:
        return len(self.slopes) == 1

    @property
    def normalized(self) -> bool:
        return self.min_value() == 0

    def normalize(self) -> "ToricTestConfig":
        return ToricTestConfig(self.breakpoints, self.slopes, self.offset - self.min_value())

    def scaled(self, k) -> "ToricTestConfig":
        """``k g`` for rational ``k > 0`` (``k = 0`` gives the trivial configuration)."""
        k = Fraction(k)
        if k < 0:
            raise ValueError("scaling factor must be nonnegative")
        if k == 0:
            return ToricTestConfig((), (Fraction(0),), Fraction(0))
        return ToricTestConfig(self.breakpoints, tuple(k * m for m in self.slopes), k * self.offset)

    def translate(self, c) -> "ToricTestConfig":
        return ToricTestConfig(self.breakpoints, self.slopes, self.offset + Fraction(c))

    def pieces(self) -> list[tuple[float, float, float, float]]:
        """``(x_lo, x_hi, slope, intercept)`` in floats, ``g = slope x + intercept``."""
        nodes, vals = self.nodes, self.node_values()
        out = []
        for i, m in enumerate(self.slopes):
            c = vals[i] - m * nodes[i]
            out.append((float(nodes[i]), float(nodes[i + 1]), float(m), float(c)))
        return out


# ---------------------------------------------------------------------------
# Conjugation along a ray
# ---------------------------------------------------------------------------


def _pieces_from_profile(sp: SymplecticProfile) -> list[tuple[float, float, float, float]]:
    x, v = sp.x_nodes, sp.values
    if x.size < 2 or abs(x[0]) > 1e-12 or abs(x[-1] - 1.0) > 1e-12:
        raise ValueError("a raw direction profile must span [0, 1] with at least two nodes")
    m = np.diff(v) / np.diff(x)
    if np.any(np.diff(m) < -1e-12):
        raise NonConvex("direction profile is not convex")
    return [(float(x[i]), float(x[i + 1]), float(m[i]), float(v[i] - m[i] * x[i])) for i in range(m.size)]


@dataclass(frozen=True, eq=False)
class RayDirection:
    """Convex direction ``g = (piecewise-linear part) + (polynomial part)``."""

    pieces: tuple[tuple[float, float, float, float], ...]
    poly: tuple[float, ...] = ()

    @classmethod
    def from_config(cls, cfg: "ToricTestConfig | SymplecticProfile", poly: Sequence[float] = ()) -> "RayDirection":
        if isinstance(cfg, ToricTestConfig):
            pieces = cfg.pieces()
        elif isinstance(cfg, SymplecticProfile):
            pieces = _pieces_from_profile(cfg)
        else:
            raise TypeError(f"unsupported direction {type(cfg).__name__}")
        return cls(tuple(pieces), tuple(float(a) for a in poly))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "RayDirection":
        return cls(((0.0, 1.0, 0.0, 0.0),), tuple(float(a) for a in coeffs))

    @property
    def has_poly(self) -> bool:
        return any(a != 0.0 for a in self.poly)

    def poly_obj(self) -> Polynomial:
        return Polynomial(self.poly if self.poly else (0.0,))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, -np.inf)
        for lo, hi, m, c in self.pieces:
            out = np.maximum(out, m * x + c)
        return out + self.poly_obj()(x)

    def max_abs_slope(self) -> float:
        lin = max(abs(m) for _, _, m, _ in self.pieces)
        if not self.has_poly:
            return lin
        xs = np.linspace(0.0, 1.0, 1001)
        return lin + float(np.max(np.abs(self.poly_obj().deriv()(xs))))

    def check_convex_at(self, t: float) -> None:
        """``phi0 + t g`` must be convex; only the polynomial part can break it."""
        if not self.has_poly or t == 0:
            return
        xs = np.linspace(1e-6, 1.0 - 1e-6, 4001)
        curv = 1.0 / (xs * (1.0 - xs)) + t * self.poly_obj().deriv(2)(xs)
        if np.min(curv) <= 0:
            raise LegendreFailure(f"phi0 + {t:g} g is not convex on [0, 1]")


def _endpoint_value(xe: float, s: np.ndarray, t: float, g_at: float) -> np.ndarray:
    return xe * s - float(phi0(xe)) - t * g_at


def conjugate_profile(direction: RayDirection, t: float, s: np.ndarray) -> np.ndarray:
    """``psi_t(s) = sup_x (x s - phi0(x) - t g(x))`` at the points ``s``."""
    s = np.asarray(s, dtype=float)
    direction.check_convex_at(t)
    best = np.full(s.shape, -np.inf)
    poly = direction.poly_obj()
    dpoly = poly.deriv()
    for lo, hi, m, c in direction.pieces:
        g_lo = m * lo + c + float(poly(lo))
        g_hi = m * hi + c + float(poly(hi))
        if not direction.has_poly or t == 0:
            y = s - t * m
            x = expit(y)
            val = softplus(y) - t * c
            val = np.where(x < lo, _endpoint_value(lo, s, t, g_lo), val)
            val = np.where(x > hi, _endpoint_value(hi, s, t, g_hi), val)
        else:
            ylo = -_LOGIT_CLIP if lo <= 0 else math.log(lo / (1 - lo))
            yhi = _LOGIT_CLIP if hi >= 1 else math.log(hi / (1 - hi))

            def slope_gap(y):
                return s - y - t * m - t * dpoly(expit(y))

            a = np.full(s.shape, ylo)
            b = np.full(s.shape, yhi)
            at_lo = slope_gap(a) <= 0
            at_hi = slope_gap(b) >= 0
            for _ in range(_BISECTION_STEPS):
                mid = 0.5 * (a + b)
                pos = slope_gap(mid) > 0
                a = np.where(pos, mid, a)
                b = np.where(pos, b, mid)
            y = 0.5 * (a + b)
            x = expit(y)
            # phi0(x) = x y - softplus(y) in logit coordinates
            val = x * (s - y) + softplus(y) - t * (m * x + c + poly(x))
            val = np.where(at_lo, _endpoint_value(lo, s, t, g_lo), val)
            val = np.where(at_hi & ~at_lo, _endpoint_value(hi, s, t, g_hi), val)
        best = np.maximum(best, val)
    return best


def ray_grid(
    directions: Sequence["RayDirection | ToricTestConfig"],
    t_max: float,
    spacing: float = DEFAULT_SPACING,
    margin: float = DEFAULT_MARGIN,
) -> SGrid:
    """Symmetric grid wide enough that every ``u_t`` (t <= t_max) is flat at the ends."""
    slope = 0.0
    for d in directions:
        rd = d if isinstance(d, RayDirection) else RayDirection.from_config(d)
        slope = max(slope, rd.max_abs_slope())
    return SGrid.with_spacing(margin + t_max * slope, spacing)


class GeodesicRay:
    """Ray ``t -> u_t`` with a lazily filled per-``t`` cache.

    Instances are not meant to be shared across threads; build one ray per
    evaluation context instead.
    """

    def __init__(
        self,
        direction: "ToricTestConfig | SymplecticProfile | RayDirection",
        grid: SGrid | None = None,
        t_max: float = DEFAULT_T_MAX,
    ):
        self.config = direction if isinstance(direction, ToricTestConfig) else None
        self.direction = direction if isinstance(direction, RayDirection) else RayDirection.from_config(direction)
        self.grid = grid if grid is not None else ray_grid([self.direction], t_max)
        self._cache: dict[float, ReducedPotential] = {}

    def potential(self, t: float) -> ReducedPotential:
        t = float(t)
        if t < 0:
            raise ValueError("rays are defined for t >= 0")
        if t not in self._cache:
            s = np.asarray(self.grid.samples)
            if t == 0.0:
                vals = np.zeros(s.size)
            else:
                vals = conjugate_profile(self.direction, t, s) - background_psi0(self.grid)
            self._cache[t] = ReducedPotential(self.grid, vals)
        return self._cache[t]

    def symplectic_values(self, t: float, x) -> np.ndarray:
        return phi0(x) + t * self.direction(x)


def ray_potential(
    cfg: "ToricTestConfig | SymplecticProfile | RayDirection", t: float, grid: SGrid | None = None
) -> ReducedPotential:
    """``u_t`` for the ray generated by ``cfg``; ``t = 0`` gives the zero potential."""
    return GeodesicRay(cfg, grid=grid, t_max=max(float(t), 1.0)).potential(t)


def geodesic_segment(direction: RayDirection, times: Sequence[float], grid: SGrid) -> list[ReducedPotential]:
    """Slices of the geodesic from 0 toward ``direction`` at the given times."""
    ray = GeodesicRay(direction, grid=grid)
    return [ray.potential(t) for t in times]


# ---------------------------------------------------------------------------
# Slopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeEstimate:
    """Least-squares tail slope of a functional along a ray."""

    value: float
    stderr: float
    t_window: tuple[float, float]
    samples: int
    residual_rms: float = 0.0
    t_values: tuple[float, ...] = field(default=(), repr=False)
    f_values: tuple[float, ...] = field(default=(), repr=False)

    def combined_stderr(self, other: "SlopeEstimate") -> float:
        return math.hypot(self.stderr, other.stderr)


FUNCTIONAL_NAMES = ("I", "J", "I_chi", "J_chi", "Ent", "Ent_beta", "K", "K_beta", "sup", "mean")


def evaluate_functional(name: str, u: ReducedPotential, beta: float | None = None, **solver) -> float:
    if name == "I":
        return energy_I(u)
    if name == "J":
        return j_energy(u)
    if name == "I_chi":
        return twisted_energy(u)[0]
    if name == "J_chi":
        return twisted_energy(u)[1]
    if name == "Ent":
        return entropy(u)
    if name == "K":
        return entropy(u) - twisted_energy(u)[1]
    if name == "sup":
        return u.sup()
    if name == "mean":
        return mean_value(u)
    if name in ("Ent_beta", "K_beta"):
        if beta is None:
            raise ValueError(f"{name} needs beta")
        # normalize sup u_t = 0 explicitly; the value is translation invariant
        un = u.shifted(-u.sup())
        eb = ent_beta(un, beta, **solver)
        return eb if name == "Ent_beta" else eb - twisted_energy(un)[1]
    raise ValueError(f"unknown functional '{name}'; expected one of {FUNCTIONAL_NAMES}")


def tail_times(t_max: float, n_samples: int) -> np.ndarray:
    return np.geomspace(0.5 * t_max, t_max, n_samples)


TAIL_MODELS = ("linear", "inverse")


def fit_slope(
    t: np.ndarray,
    f: np.ndarray,
    residual_bound: float | None = DEFAULT_RESIDUAL_BOUND,
    model: str = "linear",
) -> SlopeEstimate:
    """Least-squares slope of ``f`` against ``t``.

    ``model="linear"`` fits ``a + K t``.  ``model="inverse"`` fits
    ``a + K t + b / t``, which absorbs the leading finite-``t`` correction of the
    radial functionals and gives a much sharper estimate of the limit slope
    from the same window.  ``stderr`` is the usual OLS standard error of ``K``.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if model == "linear":
        design = np.stack([np.ones_like(t), t], axis=1)
    elif model == "inverse":
        design = np.stack([np.ones_like(t), t, 1.0 / t], axis=1)
    else:
        raise ValueError(f"unknown tail model '{model}'; expected one of {TAIL_MODELS}")
    coef, *_ = np.linalg.lstsq(design, f, rcond=None)
    resid = f - design @ coef
    dof = t.size - design.shape[1]
    if dof <= 0:
        raise ValueError("not enough samples for the tail model")
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    rms = float(np.sqrt(np.mean(resid**2)))
    est = SlopeEstimate(
        float(coef[1]),
        float(np.sqrt(max(cov[1, 1], 0.0))),
        (float(t[0]), float(t[-1])),
        int(t.size),
        rms,
        tuple(float(v) for v in t),
        tuple(float(v) for v in f),
    )
    if residual_bound is not None and rms > residual_bound:
        raise SlopeUnstable(f"tail fit residual {rms:.3e} exceeds {residual_bound:.3e}", est)
    return est


def radial_slope(
    functional: str,
    ray: GeodesicRay,
    t_max: float = DEFAULT_T_MAX,
    n_samples: int = DEFAULT_SAMPLES,
    beta: float | None = None,
    residual_bound: float | None = DEFAULT_RESIDUAL_BOUND,
    model: str = "linear",
    **solver,
) -> SlopeEstimate:
    """Tail slope of ``functional(u_t)`` over ``[t_max/2, t_max]``."""
    if t_max < 10 or n_samples < 4:
        raise ValueError("radial slopes need t_max >= 10 and n_samples >= 4")
    t = tail_times(t_max, n_samples)
    f = np.array([evaluate_functional(functional, ray.potential(tk), beta, **solver) for tk in t])
    if not np.all(np.isfinite(f)):
        raise SlopeUnstable(f"{functional} is not finite along the ray")
    return fit_slope(t, f, residual_bound, model)


def _log_exp_integral(v: ReducedPotential, u: ReducedPotential, beta: float) -> float:
    d = beta * (v.values - u.values)
    top = float(np.max(d))
    return top + math.log(float(np.sum(np.exp(d - top) * u.grid.background_mass)))


def l_beta_numeric(
    v_ray: GeodesicRay,
    u_ray: GeodesicRay,
    beta: float,
    t_max: float = DEFAULT_T_MAX,
    n_samples: int = DEFAULT_SAMPLES,
    residual_bound: float | None = DEFAULT_RESIDUAL_BOUND,
    model: str = "linear",
) -> SlopeEstimate:
    """Tail slope of ``-log int e^{beta (v_t - u_t)} omega``."""
    require_same_grid(v_ray.grid, u_ray.grid)
    t = tail_times(t_max, n_samples)
    f = np.array([-_log_exp_integral(v_ray.potential(tk), u_ray.potential(tk), beta) for tk in t])
    return fit_slope(t, f, residual_bound, model)


def l_beta_integral_threshold(
    v_ray: GeodesicRay, u_ray: GeodesicRay, beta: float, t_max: float = DEFAULT_T_MAX, n_samples: int = DEFAULT_SAMPLES
) -> SlopeEstimate:
    """Largest ``tau`` with ``int_0^inf e^{tau t} A(t) dt < inf``, ``A(t) = int e^{beta(v_t-u_t)} omega``.

    If ``log A(t) ~ -L t`` then the time integral converges exactly for
    ``tau < L``, so the threshold is read off the same tail fit of ``log A``.
    """
    return l_beta_numeric(v_ray, u_ray, beta, t_max, n_samples, residual_bound=None)


@dataclass(frozen=True)
class ChordalValue:
    value: float
    increment: float
    t_probe: float


def chordal_d1(ray_a: GeodesicRay, ray_b: GeodesicRay, t_probe: float = DEFAULT_T_MAX) -> ChordalValue:
    """``d1(u_t, v_t)/t`` at ``t_probe`` and its change since ``t_probe/2``."""
    require_same_grid(ray_a.grid, ray_b.grid)
    if t_probe <= 0:
        raise ValueError("t_probe must be positive")

    def ratio(t):
        return d1(ray_a.potential(t), ray_b.potential(t)) / t

    full = ratio(t_probe)
    return ChordalValue(full, full - ratio(0.5 * t_probe), float(t_probe))


def radial_ent_beta_lower_probe(
    u_ray: GeodesicRay,
    beta: float,
    trial_rays: Sequence[GeodesicRay],
    t_max: float = DEFAULT_T_MAX,
    n_samples: int = DEFAULT_SAMPLES,
    model: str = "linear",
) -> list[SlopeEstimate]:
    """Per trial ray ``v``: ``L^beta(v, u) + beta (I{v} - I{u})`` with its stderr."""
    i_u = radial_slope("I", u_ray, t_max, n_samples, residual_bound=None)
    out = []
    for v in trial_rays:
        lb = l_beta_numeric(v, u_ray, beta, t_max, n_samples, residual_bound=None, model=model)
        i_v = radial_slope("I", v, t_max, n_samples, residual_bound=None)
        value = lb.value + beta * (i_v.value - i_u.value)
        err = math.sqrt(lb.stderr**2 + (beta * i_v.stderr) ** 2 + (beta * i_u.stderr) ** 2)
        out.append(SlopeEstimate(value, err, lb.t_window, lb.samples, lb.residual_rms))
    return out


@dataclass(frozen=True)
class StabilityRow:
    config: str
    k_beta_slope: float
    k_beta_stderr: float
    j_slope: float
    j_stderr: float
    gamma: float
    satisfied: bool


def stability_probe(
    configs: Sequence[ToricTestConfig],
    beta: float,
    gamma: float,
    t_max: float = DEFAULT_T_MAX,
    n_samples: int = DEFAULT_SAMPLES,
    residual_bound: float | None = DEFAULT_RESIDUAL_BOUND,
    model: str = "linear",
) -> list[StabilityRow]:
    """Check ``K^beta-slope >= gamma * J-slope`` per configuration."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    rows = []
    for cfg in configs:
        ray = GeodesicRay(cfg, t_max=t_max)
        kb = radial_slope("K_beta", ray, t_max, n_samples, beta=beta, residual_bound=residual_bound, model=model)
        js = radial_slope("J", ray, t_max, n_samples, residual_bound=residual_bound, model=model)
        rows.append(
            StabilityRow(str(cfg), kb.value, kb.stderr, js.value, js.stderr, float(gamma), bool(kb.value >= gamma * js.value))
        )
    return rows


__all__ = [
    "ChordalValue",
    "FUNCTIONAL_NAMES",
    "GeodesicRay",
    "RayDirection",
    "SlopeEstimate",
    "StabilityRow",
    "TAIL_MODELS",
    "ToricTestConfig",
    "chordal_d1",
    "conjugate_profile",
    "evaluate_functional",
    "fit_slope",
    "geodesic_segment",
    "l_beta_integral_threshold",
    "l_beta_numeric",
    "parse_assignments",
    "parse_rational_list",
    "radial_ent_beta_lower_probe",
    "radial_slope",
    "ray_grid",
    "ray_potential",
    "stability_probe",
    "tail_times",
]
