"""Grids, reduced potentials, Legendre duality, rooftop envelopes and quadrature.

Everything lives on the fiber coordinate ``s = log|z|^2`` of the Riemann sphere
with its Fubini-Study background ``psi0(s) = log(1 + e^s)`` (total volume 1).
A potential ``u`` is stored as its samples on a uniform grid; the full convex
profile is ``psi = psi0 + u`` and its Monge-Ampere measure is ``psi''(s) ds``.

Discrete conventions
--------------------
Nodes carry trapezoid weights ``w`` (``h`` inside, ``h/2`` at the two ends).
The background measure is represented by node masses ``m0``:

* interior nodes get the exact second difference of ``psi0`` divided by ``h``,
  written as ``log1p(4 sinh^2(h/2) psi0'')/h`` to stay accurate in the tails;
* end nodes get the gap between the first (last) chord slope and the true
  boundary slope of ``psi0``.

The masses telescope to ``psi0'(s_max) - psi0'(s_min)``.  The mass of ``psi0 + u``
is ``m0 + w * D2 u`` where ``D2`` is the Neumann second difference; with this
choice ``sum(w * D2 u) = 0`` exactly and every identity used downstream
(gradient of ``I``, the quantization equation, total mass) holds at the
discrete level rather than only up to O(h^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy.special import expit

from .errors import (
    GridMismatch,
    InadmissibleInput,
    LegendreFailure,
    NonConvexInput,
    NonFinite,
)

TOL_CONVEX = 1e-10
TOL_LEGENDRE = 1e-8
# Offsets of the s-window used by default; tails of psi0'' beyond it are < e^-40.
DEFAULT_HALF_WIDTH = 40.0
DEFAULT_N_POINTS = 2001


def softplus(s):
    """Numerically stable ``log(1 + e^s)``."""
    return np.logaddexp(0.0, s)


def psi0_second(s):
    """``psi0''(s) = e^s / (1 + e^s)^2`` evaluated without overflow."""
    e = np.exp(-np.abs(np.asarray(s, dtype=float)))
    return e / (1.0 + e) ** 2


def phi0(x):
    """Legendre transform of ``psi0``: ``x log x + (1-x) log(1-x)`` on [0, 1]."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, (1 - x) * np.log(np.where(x < 1, 1 - x, 1.0)), 0.0)
    return a + b


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SGrid:
    """Uniform grid on ``[s_min, s_max]`` with ``n_points`` nodes."""

    s_min: float
    s_max: float
    n_points: int

    def __post_init__(self):
        if not (self.s_min < 0.0 < self.s_max):
            raise ValueError(f"grid must straddle 0, got [{self.s_min}, {self.s_max}]")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValueError(f"n_points must be an integer >= 3, got {self.n_points}")

    @classmethod
    def symmetric(cls, half_width: float = DEFAULT_HALF_WIDTH, n_points: int = DEFAULT_N_POINTS) -> "SGrid":
        return cls(-float(half_width), float(half_width), int(n_points))

    @classmethod
    def with_spacing(cls, half_width: float, spacing: float) -> "SGrid":
        """Symmetric grid whose spacing is at most ``spacing``."""
        n_cells = max(2, int(math.ceil(2.0 * half_width / spacing)))
        return cls(-float(half_width), float(half_width), n_cells + 1)

    @property
    def h(self) -> float:
        return (self.s_max - self.s_min) / (self.n_points - 1)

    @cached_property
    def samples(self) -> np.ndarray:
        s = np.linspace(self.s_min, self.s_max, self.n_points)
        s.setflags(write=False)
        return s

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.setflags(write=False)
        return w

    @cached_property
    def background_mass(self) -> np.ndarray:
        """Node masses of the background measure ``psi0'' ds``."""
        s, h = self.samples, self.h
        m = np.empty(self.n_points)
        m[1:-1] = np.log1p(4.0 * math.sinh(0.5 * h) ** 2 * psi0_second(s[1:-1])) / h

        def end_mass(a: float, b: float) -> float:
            # chord slope of psi0 on [a, b] minus psi0'(a); use the form that is
            # free of cancellation when a is very negative.
            chord = (softplus(b) - softplus(a)) / (b - a)
            return float(chord - expit(a))

        m[0] = end_mass(s[0], s[1])
        # mirror symmetry psi0(s) = s + psi0(-s) turns the right end into a left end
        m[-1] = end_mass(-s[-1], -s[-2])
        m.setflags(write=False)
        return m

    @cached_property
    def background_density(self) -> np.ndarray:
        d = self.background_mass / self.weights
        d.setflags(write=False)
        return d

    def header(self) -> str:
        return f"s_min={self.s_min!r} s_max={self.s_max!r} n_points={self.n_points}"

    def same_as(self, other: "SGrid") -> bool:
        return (self.s_min, self.s_max, self.n_points) == (other.s_min, other.s_max, other.n_points)


def require_same_grid(*grids: SGrid) -> None:
    first = grids[0]
    for g in grids[1:]:
        if not first.same_as(g):
            raise GridMismatch(f"grid {g.header()} differs from {first.header()}")


def second_difference(values: np.ndarray, h: float) -> np.ndarray:
    """Neumann second difference; the end rows use a reflected ghost node."""
    v = np.asarray(values, dtype=float)
    d = np.empty_like(v)
    d[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h**2
    d[0] = 2.0 * (v[1] - v[0]) / h**2
    d[-1] = 2.0 * (v[-2] - v[-1]) / h**2
    return d


# ---------------------------------------------------------------------------
# Potentials and measures
# ---------------------------------------------------------------------------


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Measure1D:
    """A nonnegative density against ``ds`` on a grid."""

    grid: SGrid
    density: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "density", _frozen(self.density))
        if self.density.shape != (self.grid.n_points,):
            raise GridMismatch("density length does not match the grid")

    @property
    def masses(self) -> np.ndarray:
        return self.density * self.grid.weights

    @property
    def total(self) -> float:
        return float(np.sum(self.masses))


def background_measure(grid: SGrid) -> Measure1D:
    return Measure1D(grid, grid.background_density)


@dataclass(frozen=True, eq=False)
class ReducedPotential:
    """Samples of an S^1-invariant potential offset ``u`` on a grid."""

    grid: SGrid
    values: np.ndarray
    boundary_slopes: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (self.grid.n_points,):
            raise GridMismatch(
                f"{self.values.shape[0]} samples for a grid of {self.grid.n_points} points"
            )

    # constructors -----------------------------------------------------------
    @classmethod
    def zeros(cls, grid: SGrid) -> "ReducedPotential":
        return cls(grid, np.zeros(grid.n_points))

    @classmethod
    def constant(cls, grid: SGrid, c: float) -> "ReducedPotential":
        return cls(grid, np.full(grid.n_points, float(c)))

    @classmethod
    def from_function(cls, grid: SGrid, f: Callable[[np.ndarray], np.ndarray]) -> "ReducedPotential":
        return cls(grid, f(np.asarray(grid.samples)))

    @classmethod
    def from_profile(cls, grid: SGrid, psi: np.ndarray) -> "ReducedPotential":
        return cls(grid, np.asarray(psi, dtype=float) - background_psi0(grid))

    # algebra ----------------------------------------------------------------
    def shifted(self, c: float) -> "ReducedPotential":
        return ReducedPotential(self.grid, self.values + c, self.boundary_slopes)

    def scaled(self, a: float) -> "ReducedPotential":
        return ReducedPotential(self.grid, a * self.values, self.boundary_slopes)

    def sup(self) -> float:
        return float(np.max(self.values))

    # geometry ---------------------------------------------------------------
    def profile(self) -> np.ndarray:
        return background_psi0(self.grid) + self.values

    def masses(self) -> np.ndarray:
        """Node masses of ``(psi0 + u)''``; they sum to the background total."""
        g = self.grid
        return g.background_mass + g.weights * second_difference(self.values, g.h)

    def measure(self) -> Measure1D:
        return Measure1D(self.grid, self.masses() / self.grid.weights)

    def min_mass_ratio(self) -> float:
        return float(np.min(self.masses() / self.grid.background_mass))

    def _mass_tolerance(self, tol: float) -> float:
        # masses are second differences of O(|u|) numbers divided by h, so
        # roundoff alone reaches a few eps * |u| / h
        scale = max(1.0, float(np.max(np.abs(self.values))), abs(self.grid.s_min), self.grid.s_max)
        return tol * self.grid.h + 32.0 * np.finfo(float).eps * scale / self.grid.h

    def is_admissible(self, tol: float = TOL_CONVEX) -> bool:
        if not np.all(np.isfinite(self.values)):
            return False
        return bool(np.min(self.masses()) >= -self._mass_tolerance(tol))

    def check_admissible(self, tol: float = TOL_CONVEX) -> None:
        if not np.all(np.isfinite(self.values)):
            raise NonFinite("potential has non-finite samples")
        m = self.masses()
        k = int(np.argmin(m))
        if m[k] < -self._mass_tolerance(tol):
            raise InadmissibleInput(
                f"negative Monge-Ampere mass {m[k]:.3e} at s={self.grid.samples[k]:.4f}"
            )


def background_psi0(grid: SGrid) -> np.ndarray:
    """Samples of the full background profile ``log(1 + e^s)``."""
    return softplus(np.asarray(grid.samples))


def integrate(f, mu: Measure1D) -> float:
    """Trapezoid quadrature of ``f * density``; ``f`` is a sample array or scalar."""
    arr = np.asarray(f, dtype=float)
    if arr.ndim and arr.shape != (mu.grid.n_points,):
        raise GridMismatch(f"integrand has {arr.size} samples, grid has {mu.grid.n_points}")
    vals = np.broadcast_to(arr, (mu.grid.n_points,))
    if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(mu.density)):
        raise NonFinite("integrand has non-finite samples")
    return float(np.sum(vals * mu.masses))


# ---------------------------------------------------------------------------
# Legendre duality
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymplecticProfile:
    """Convex function on the moment interval, piecewise linear between nodes."""

    x_nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x_nodes)
        v = _frozen(self.values)
        if x.ndim != 1 or x.shape != v.shape or x.size == 0:
            raise ValueError("x_nodes and values must be equal-length 1-D arrays")
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise ValueError("x_nodes must be strictly increasing")
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        """Piecewise-linear evaluation; ``inf`` outside the node range."""
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.x_nodes, self.values)
        outside = (x < self.x_nodes[0]) | (x > self.x_nodes[-1])
        return np.where(outside, np.inf, out)

    def second_differences(self) -> np.ndarray:
        if self.x_nodes.size < 3:
            return np.zeros(0)
        slopes = np.diff(self.values) / np.diff(self.x_nodes)
        return np.diff(slopes)

    def is_convex(self, tol: float = TOL_CONVEX) -> bool:
        return bool(np.all(self.second_differences() >= -tol))


def legendre(profile: np.ndarray, grid: SGrid, tol: float = TOL_CONVEX) -> SymplecticProfile:
    """Discrete Legendre transform by the monotone chord-slope sweep.

    The piecewise-linear interpolant of a convex sample set has a conjugate whose
    breakpoints are exactly the chord slopes ``p_k``, with value
    ``p_k s_k - f_k`` there.  Repeated slopes collapse to one node, so an affine
    input returns a single node.
    """
    f = np.asarray(profile, dtype=float)
    if f.shape != (grid.n_points,):
        raise GridMismatch("profile length does not match the grid")
    if not np.all(np.isfinite(f)):
        raise NonFinite("profile has non-finite samples")
    s, h = np.asarray(grid.samples), grid.h
    p = np.diff(f) / h
    if np.any(np.diff(p) < -tol):
        k = int(np.argmin(np.diff(p)))
        raise NonConvexInput(f"second difference {np.diff(p)[k] * h:.3e} at node {k + 1}")
    if p[0] < -tol or p[-1] > 1.0 + tol:
        raise LegendreFailure(f"chord slopes [{p[0]:.6g}, {p[-1]:.6g}] leave the moment interval")
    # sweep: the conjugate at p_k is attained at s_k (equivalently s_{k+1})
    vals = p * s[:-1] - f[:-1]
    p = np.maximum.accumulate(p)  # clean tiny roundoff inversions
    keep = np.ones(p.size, dtype=bool)
    keep[1:] = p[1:] > p[:-1] + 1e-15
    if not np.all(keep):
        # for repeated slopes the attaining value is the same up to roundoff;
        # retain the largest to stay a supremum
        idx = np.flatnonzero(keep)
        vals = np.maximum.reduceat(vals, idx)
        p = p[idx]
    return SymplecticProfile(p, vals)


def legendre_inverse(sp: SymplecticProfile, grid: SGrid) -> np.ndarray:
    """Conjugate of a piecewise-linear convex profile, sampled on ``grid``.

    ``psi(s) = max_j (x_j s - phi_j)``.  The maximizing index is nondecreasing in
    ``s``, so a single pointer sweep suffices.
    """
    x, phi = sp.x_nodes, sp.values
    s = np.asarray(grid.samples)
    out = np.empty(s.size)
    j = 0
    m = x.size
    for k in range(s.size):
        sk = s[k]
        best = x[j] * sk - phi[j]
        while j + 1 < m:
            cand = x[j + 1] * sk - phi[j + 1]
            if cand >= best:
                j += 1
                best = cand
            else:
                break
        out[k] = best
    return out


def _lower_hull(s: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull vertices (Andrew's monotone chain)."""
    hull: list[int] = []
    for k in range(s.size):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # remove j when it lies on or above the chord from i to k
            if (f[j] - f[i]) * (s[k] - s[i]) >= (f[k] - f[i]) * (s[j] - s[i]):
                hull.pop()
            else:
                break
        hull.append(k)
    return np.asarray(hull, dtype=int)


def convex_minorant_unit_slopes(f: np.ndarray, grid: SGrid) -> np.ndarray:
    """Largest convex function below ``f`` whose slopes lie in [0, 1]."""
    s = np.asarray(grid.samples)
    hull = _lower_hull(s, f)
    hs, hf = s[hull], f[hull]
    slopes = np.diff(hf) / np.diff(hs)
    interior = (slopes > 0.0) & (slopes < 1.0)
    # conjugate of the hull at a hull slope p (between vertices i, i+1) is p s_i - f_i
    xs = [0.0]
    vs = [float(-np.min(f))]
    for i in np.flatnonzero(interior):
        xs.append(float(slopes[i]))
        vs.append(float(slopes[i] * hs[i] - hf[i]))
    xs.append(1.0)
    vs.append(float(np.max(s - f)))
    xs_a, vs_a = np.asarray(xs), np.asarray(vs)
    keep = np.ones(xs_a.size, dtype=bool)
    keep[1:] = xs_a[1:] > xs_a[:-1]
    return legendre_inverse(SymplecticProfile(xs_a[keep], vs_a[keep]), grid)


def rooftop_envelope(u: ReducedPotential, v: ReducedPotential) -> ReducedPotential:
    """``P(u, v)``: the largest admissible potential below ``min(u, v)``."""
    require_same_grid(u.grid, v.grid)
    grid = u.grid
    psi0 = background_psi0(grid)
    f = psi0 + np.minimum(u.values, v.values)
    env = convex_minorant_unit_slopes(f, grid)
    # never exceed the pointwise minimum because of roundoff in the conjugation
    return ReducedPotential(grid, np.minimum(env - psi0, np.minimum(u.values, v.values)))


# ---------------------------------------------------------------------------
# Two-column serialization
# ---------------------------------------------------------------------------

_POTENTIAL_TAG = "kbeta-potential"
_PROFILE_TAG = "kbeta-profile"
_SERIES_TAG = "kbeta-series"


def write_columns(path: str | Path, header: str, x: Iterable[float], y: Iterable[float]) -> None:
    """Write ``# header`` followed by ``x y`` lines in round-trip float format."""
    lines = [f"# {header}"]
    for a, b in zip(x, y):
        lines.append(f"{float(a)!r} {float(b)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_columns(path: str | Path) -> tuple[str, np.ndarray, np.ndarray]:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# "):
        raise ValueError(f"{path}: missing '# ' header line")
    header = text[0][2:].strip()
    rows = [ln.split() for ln in text[1:] if ln.strip()]
    if any(len(r) != 2 for r in rows):
        raise ValueError(f"{path}: every data line must have two columns")
    data = np.asarray(rows, dtype=float).reshape(-1, 2)
    return header, data[:, 0], data[:, 1]


def _parse_header(header: str, tag: str) -> dict[str, str]:
    parts = header.split()
    if not parts or parts[0] != tag:
        raise ValueError(f"expected a '{tag}' header, got '{header}'")
    return dict(p.split("=", 1) for p in parts[1:])


def save_potential(path: str | Path, u: ReducedPotential) -> None:
    write_columns(path, f"{_POTENTIAL_TAG} {u.grid.header()}", u.grid.samples, u.values)


def load_potential(path: str | Path) -> ReducedPotential:
    header, s, v = read_columns(path)
    meta = _parse_header(header, _POTENTIAL_TAG)
    grid = SGrid(float(meta["s_min"]), float(meta["s_max"]), int(meta["n_points"]))
    if s.size != grid.n_points or not np.allclose(s, grid.samples, rtol=0, atol=1e-9 * grid.h):
        raise GridMismatch(f"{path}: abscissae do not match the header grid")
    return ReducedPotential(grid, v)


def save_profile(path: str | Path, sp: SymplecticProfile) -> None:
    write_columns(path, f"{_PROFILE_TAG} n_nodes={sp.x_nodes.size}", sp.x_nodes, sp.values)


def load_profile(path: str | Path) -> SymplecticProfile:
    header, x, v = read_columns(path)
    meta = _parse_header(header, _PROFILE_TAG)
    if int(meta.get("n_nodes", x.size)) != x.size:
        raise ValueError(f"{path}: node count does not match the header")
    return SymplecticProfile(x, v)


def save_series(path: str | Path, name: str, x, y) -> None:
    """Plot-data file: one named curve as two columns."""
    write_columns(path, f"{_SERIES_TAG} name={name}", x, y)


__all__ = [
    "SGrid",
    "ReducedPotential",
    "SymplecticProfile",
    "Measure1D",
    "background_measure",
    "background_psi0",
    "convex_minorant_unit_slopes",
    "integrate",
    "legendre",
    "legendre_inverse",
    "load_potential",
    "load_profile",
    "phi0",
    "psi0_second",
    "read_columns",
    "require_same_grid",
    "rooftop_envelope",
    "save_potential",
    "save_profile",
    "save_series",
    "second_difference",
    "softplus",
    "write_columns",
]
