"""Energy functionals of the reduced model and the d1 distance.

Normalizations: volume ``V = 1``, dimension ``n = 1``, twisting form
``chi = Ric(omega) = 2 omega`` so that ``chi_bar = S_bar = 2``.  With the node
masses ``m0`` (background) and ``m_u`` (of ``psi0 + u``):

* ``I(u)   = 1/2 * sum u (m0 + m_u)``
* ``J(u)   = sum u m0 - I(u)``
* ``I_chi  = 2 * sum u m0``,   ``J_chi = I_chi - 2 I = 2 J``
* ``Ent(u) = sum m_u log(m_u / m0)``   (``0 log 0 = 0``)
* ``K = Ent - J_chi``,   ``K^beta = Ent^beta - J_chi``
* ``Ent^beta(u) = beta (I(u^beta) - I(u))``
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import NonFinite
from .quantizer import QuantizationResult, quantize
from .reduction_geometry import ReducedPotential, require_same_grid, rooftop_envelope

# a node whose density exceeds this multiple of max(psi0'') = 1/4 is treated as
# carrying a point mass; such potentials have infinite entropy
DENSITY_CAP = 25.0
TOL_FUNCTIONAL = 1e-6


def _finite(u: ReducedPotential) -> np.ndarray:
    if not np.all(np.isfinite(u.values)):
        raise NonFinite("potential has non-finite samples")
    return u.values


def energy_I(u: ReducedPotential) -> float:
    """Monge-Ampere energy; concave, with gradient the Monge-Ampere measure."""
    v = _finite(u)
    return float(0.5 * np.sum(v * (u.grid.background_mass + u.masses())))


def mean_value(u: ReducedPotential) -> float:
    """``int u omega`` against the background measure."""
    return float(np.sum(_finite(u) * u.grid.background_mass))


def j_energy(u: ReducedPotential) -> float:
    return mean_value(u) - energy_I(u)


def twisted_energy(u: ReducedPotential) -> tuple[float, float]:
    """``(I_chi, J_chi)`` for ``chi = 2 omega``."""
    i_chi = 2.0 * mean_value(u)
    return i_chi, i_chi - 2.0 * energy_I(u)


def max_density_ratio(u: ReducedPotential) -> float:
    """Largest node density of ``psi0 + u`` in units of ``max psi0'' = 1/4``."""
    return float(np.max(u.masses() / u.grid.weights) / 0.25)


def entropy(u: ReducedPotential, density_cap: float = DENSITY_CAP) -> float:
    """Relative entropy of the Monge-Ampere measure; ``math.inf`` for point masses."""
    _finite(u)
    if max_density_ratio(u) > density_cap:
        return math.inf
    m = u.masses()
    m0 = u.grid.background_mass
    pos = m > 0
    terms = np.zeros_like(m)
    terms[pos] = m[pos] * np.log(m[pos] / m0[pos])
    return float(np.sum(terms))


def ent_beta(u: ReducedPotential, beta: float, result: QuantizationResult | None = None, **solver) -> float:
    """``beta (I(u^beta) - I(u))``; pass ``result`` to reuse an existing solve."""
    if result is None:
        result = quantize(u, beta, **solver)
    return float(beta * (energy_I(result.u_beta) - energy_I(u)))


def ent_beta_sup_probe(u: ReducedPotential, beta: float, trial_vs: Sequence[ReducedPotential]) -> list[float]:
    """Objective ``-log int e^{beta (v - u)} omega + beta (I(v) - I(u))`` per trial."""
    iu = energy_I(u)
    m0 = u.grid.background_mass
    out = []
    for v in trial_vs:
        require_same_grid(u.grid, v.grid)
        d = beta * (_finite(v) - u.values)
        top = float(np.max(d))
        # rescaled so the largest exponent is 0
        log_int = top + math.log(float(np.sum(np.exp(d - top) * m0)))
        out.append(-log_int + beta * (energy_I(v) - iu))
    return out


def k_energy(u: ReducedPotential, density_cap: float = DENSITY_CAP) -> float:
    return entropy(u, density_cap) - twisted_energy(u)[1]


def k_beta(u: ReducedPotential, beta: float, result: QuantizationResult | None = None, **solver) -> float:
    return ent_beta(u, beta, result, **solver) - twisted_energy(u)[1]


def d1(u: ReducedPotential, v: ReducedPotential) -> float:
    """``I(u) + I(v) - 2 I(P(u, v))``."""
    require_same_grid(u.grid, v.grid)
    if np.array_equal(u.values, v.values):
        return 0.0
    p = rooftop_envelope(u, v)
    return float(energy_I(u) + energy_I(v) - 2.0 * energy_I(p))


@dataclass(frozen=True)
class FunctionalReport:
    """All scalar functionals of one potential at one value of beta."""

    i_energy: float
    j_energy: float
    i_twisted: float
    j_twisted: float
    entropy: float
    ent_beta: float
    k_energy: float
    k_beta: float
    beta: float
    residual_sup: float
    newton_iters: int

    def to_record(self) -> dict:
        rec = asdict(self)
        for key, val in rec.items():
            if isinstance(val, float) and math.isinf(val):
                rec[key] = "inf"
        return rec


def functional_report(u: ReducedPotential, beta: float, **solver) -> FunctionalReport:
    res = quantize(u, beta, **solver)
    i_u = energy_I(u)
    i_chi, j_chi = twisted_energy(u)
    ent = entropy(u)
    eb = float(beta * (energy_I(res.u_beta) - i_u))
    return FunctionalReport(
        i_energy=i_u,
        j_energy=mean_value(u) - i_u,
        i_twisted=i_chi,
        j_twisted=j_chi,
        entropy=ent,
        ent_beta=eb,
        k_energy=ent - j_chi,
        k_beta=eb - j_chi,
        beta=float(beta),
        residual_sup=res.residual_sup,
        newton_iters=res.newton_iters,
    )


__all__ = [
    "DENSITY_CAP",
    "FunctionalReport",
    "d1",
    "energy_I",
    "ent_beta",
    "ent_beta_sup_probe",
    "entropy",
    "functional_report",
    "j_energy",
    "k_beta",
    "k_energy",
    "max_density_ratio",
    "mean_value",
    "twisted_energy",
]
