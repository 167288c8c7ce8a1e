"""Seeded corpora of admissible potentials and geodesic-segment directions.

Two families of bounded potentials are produced:

* ``harmonic`` seeds are combinations of the first two zonal spherical
  harmonics, written in the moment coordinate ``x = expit(s)``:
  ``u = eps * (a P1(2x-1) + b P2(2x-1))`` with ``|b| <= 0.6 |a|``.  They are
  smooth on the whole sphere and dominated by the lowest Laplace mode.
* ``profile`` seeds are logistic bumps and steps centred away from the
  equator.  They are smooth too, but spread over many modes.

Every seed is scaled so that its Monge-Ampere density stays within a random
factor of the background and then translated to ``sup u = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_legendre, expit

from .reduction_geometry import ReducedPotential, SGrid, psi0_second
from .rays import RayDirection

HARMONIC_P2_RATIO = 0.6


@dataclass(frozen=True)
class Seed:
    name: str
    family: str
    potential: ReducedPotential

    @property
    def smooth(self) -> bool:
        """Member of the low-mode subset used by convergence checks."""
        return self.family == "harmonic"


def _fit_amplitude(grid: SGrid, shape: np.ndarray, deviation: float) -> ReducedPotential:
    """Scale ``shape`` so that ``max |m_u/m0 - 1| = deviation``, then set sup to 0."""
    unit = ReducedPotential(grid, shape)
    ratio = unit.masses() / grid.background_mass - 1.0
    amp = deviation / float(np.max(np.abs(ratio)))
    vals = amp * shape
    return ReducedPotential(grid, vals - np.max(vals))


def harmonic_shape(grid: SGrid, a: float, b: float) -> np.ndarray:
    y = 2.0 * expit(np.asarray(grid.samples)) - 1.0
    return a * eval_legendre(1, y) + b * eval_legendre(2, y)


def seed_bump(grid: SGrid, amplitude: float = 0.6) -> ReducedPotential:
    """The documented reference seed ``u(s) = -amplitude * expit(s)^2``.

    Its density ratio ``1 - amplitude (4x - 6x^2)`` stays in
    ``[1 - 2a/3, 1 + 2a]``, so the default is comfortably admissible.
    """
    x = expit(np.asarray(grid.samples))
    return ReducedPotential(grid, -amplitude * x**2)


def harmonic_seed(grid: SGrid, rng: np.random.Generator) -> ReducedPotential:
    a = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.0)
    b = a * rng.uniform(-HARMONIC_P2_RATIO, HARMONIC_P2_RATIO)
    return _fit_amplitude(grid, harmonic_shape(grid, a, b), rng.uniform(0.2, 0.7))


def profile_seed(grid: SGrid, rng: np.random.Generator) -> ReducedPotential:
    s = np.asarray(grid.samples)
    shape = np.zeros_like(s)
    for _ in range(int(rng.integers(1, 4))):
        k = float(rng.choice([1.0, 2.0]))
        c = rng.uniform(-2.0, 2.0)
        w = rng.normal()
        if rng.random() < 0.5:
            shape += w * 4.0 * psi0_second(k * (s - c))
        else:
            shape += w * expit(k * (s - c))
    return _fit_amplitude(grid, shape, rng.uniform(0.2, 0.6))


def corpus(grid: SGrid, seed: int = 0, n_harmonic: int = 12, n_profile: int = 12) -> list[Seed]:
    """Deterministic corpus: ``n_harmonic`` low-mode seeds then ``n_profile`` others."""
    rng = np.random.default_rng(seed)
    out = [Seed(f"harmonic-{i:02d}", "harmonic", harmonic_seed(grid, rng)) for i in range(n_harmonic)]
    out += [Seed(f"profile-{i:02d}", "profile", profile_seed(grid, rng)) for i in range(n_profile)]
    return out


def segment_directions(seed: int = 0, count: int = 5) -> list[RayDirection]:
    """Cubic directions ``q`` with ``|q''| <= 3`` so ``phi0 + t q`` is convex for ``t <= 1``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c2, c3 = rng.uniform(-1.0, 1.0, size=2)
        # |q''| = |2 c2 + 6 c3 x| <= 2|c2| + 6|c3|, rescale to at most 3
        scale = 3.0 / max(2 * abs(c2) + 6 * abs(c3), 1e-12) * rng.uniform(0.4, 1.0)
        c1 = rng.uniform(-0.5, 0.5)
        out.append(RayDirection.polynomial((0.0, c1, scale * c2, scale * c3)))
    return out


__all__ = [
    "HARMONIC_P2_RATIO",
    "Seed",
    "corpus",
    "harmonic_seed",
    "harmonic_shape",
    "profile_seed",
    "seed_bump",
    "segment_directions",
]
