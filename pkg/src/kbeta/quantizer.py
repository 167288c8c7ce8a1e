"""Damped Newton solver for the transcendental quantization ``u -> u^beta``.

The equation ``(psi0 + w)'' = e^{beta (w - u)} psi0''`` becomes, in node masses,

    w_k * D2(w)_k + m0_k * (1 - exp(beta (w_k - u_k))) = 0,

with the Neumann second difference ``D2``.  Dividing by the trapezoid weight
gives the residual used throughout (density units).  The Jacobian is
tridiagonal and strictly diagonally dominant, so every Newton step is one
banded solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import InadmissibleInput, NewtonDiverged, NonFinite
from .reduction_geometry import ReducedPotential, background_psi0, require_same_grid, second_difference

log = logging.getLogger(__name__)

TOL_NEWTON = 1e-10
MAX_ITERS = 100
MAX_HALVINGS = 30
TOL_PSH = 1e-6


@dataclass(frozen=True)
class QuantizationResult:
    """Solution ``u^beta`` with the diagnostics of the solve that produced it."""

    u_beta: ReducedPotential
    beta: float
    residual_sup: float
    newton_iters: int
    converged: bool


def _residual(w: np.ndarray, u: np.ndarray, beta: float, rho0: np.ndarray, h: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return second_difference(w, h) + rho0 * (1.0 - np.exp(beta * (w - u)))


def _newton(
    u: np.ndarray,
    w0: np.ndarray,
    beta: float,
    rho0: np.ndarray,
    h: float,
    tol: float,
    max_iters: int,
) -> tuple[np.ndarray, float, int]:
    n = u.size
    w = w0.copy()
    r = _residual(w, u, beta, rho0, h)
    rn = float(np.max(np.abs(r)))
    inv_h2 = 1.0 / h**2
    ab = np.zeros((3, n))
    ab[0, 1:] = inv_h2
    ab[2, :-1] = inv_h2
    ab[0, 1] = 2.0 * inv_h2
    ab[2, -2] = 2.0 * inv_h2
    it = 0
    while it < max_iters:
        it += 1
        with np.errstate(over="ignore"):
            e = rho0 * np.exp(beta * (w - u))
        if not np.all(np.isfinite(e)):
            break
        ab[1, :] = -2.0 * inv_h2 - beta * e
        dw = solve_banded((1, 1), ab, -r, check_finite=False)
        lam = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            trial = w + lam * dw
            rt = _residual(trial, u, beta, rho0, h)
            rtn = float(np.max(np.abs(rt)))
            if np.isfinite(rtn) and (rtn < rn or rtn <= tol):
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
        prev = rn
        w, r, rn = trial, rt, rtn
        # keep iterating past tol until roundoff stops the decrease
        if rn <= tol and (np.max(np.abs(lam * dw)) < 1e-13 or rn > 0.5 * prev):
            break
    return w, rn, it


def quantize(
    u: ReducedPotential,
    beta: float,
    tol: float = TOL_NEWTON,
    max_iters: int = MAX_ITERS,
    continuation: bool = True,
) -> QuantizationResult:
    """Solve for ``u^beta``; raises :class:`NewtonDiverged` on failure."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not np.all(np.isfinite(u.values)):
        raise NonFinite("potential has non-finite samples")
    u.check_admissible()
    grid = u.grid
    rho0 = np.asarray(grid.background_density)
    # translation equivariance is exact: solve for u - max(u), add it back
    c = float(np.max(u.values))
    v = u.values - c
    w, rn, it = _newton(v, v, beta, rho0, grid.h, tol, max_iters)
    if not rn <= tol and continuation:
        log.debug("plain Newton stalled at beta=%g (residual %.2e); continuing in beta", beta, rn)
        w, rn, it = _continuation(v, beta, rho0, grid.h, tol, max_iters)
    converged = bool(rn <= tol)
    if not converged:
        raise NewtonDiverged(f"quantization at beta={beta:g} stopped with residual {rn:.3e} after {it} iterations")
    return QuantizationResult(ReducedPotential(grid, w + c), float(beta), rn, it, converged)


def _continuation(v, beta, rho0, h, tol, max_iters):
    # descend from a large beta, where u^beta ~ u is an excellent start
    betas = [beta * 2.0**k for k in range(8, -1, -1)]
    w = v.copy()
    total = 0
    rn = np.inf
    for b in betas:
        w, rn, it = _newton(v, w, b, rho0, h, tol, max_iters)
        total += it
        if not np.isfinite(rn):
            break
    return w, rn, total


# ---------------------------------------------------------------------------
# Families and the joint convexity check
# ---------------------------------------------------------------------------

# lattice directions (ds, dt) in index units; together they sample every
# direction to within ~20 degrees, and each second difference is exact for
# convex functions
STENCIL = ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (2, -1), (1, 2), (1, -2))


@dataclass(frozen=True)
class JointConvexityReport:
    """Joint (s, t) convexity diagnostics on the sample lattice."""

    min_directional: float
    argmin: tuple[int, int, tuple[int, int]]
    min_hessian_det: float

    def passes(self, tol: float = TOL_PSH) -> bool:
        return self.min_directional >= -tol


def joint_convexity(times: Sequence[float], slices: Sequence[ReducedPotential]) -> JointConvexityReport:
    """Second-difference test of ``(s, t) -> psi0(s) + u_t(s)`` on the lattice.

    Every directional second difference is normalized by the squared physical
    length of its stencil vector, so the minimum is comparable to a lower bound
    on the Hessian.  The central-difference Hessian determinant is reported as a
    secondary diagnostic.
    """
    t = np.asarray(times, dtype=float)
    if t.size < 3:
        raise ValueError("need at least three time slices")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-12 * max(1.0, abs(t[-1])):
        raise ValueError("time slices must be equally spaced")
    tau = float(dt[0])
    require_same_grid(*(u.grid for u in slices))
    grid = slices[0].grid
    h = grid.h
    psi = background_psi0(grid)[None, :] + np.stack([u.values for u in slices])  # (n_t, n_s)
    nt, ns = psi.shape
    best = np.inf
    where = (0, 0, (0, 0))
    for a, b in STENCIL:
        # rows index t (offset b), columns index s (offset a)
        j0, j1 = abs(b), nt - abs(b)
        k0, k1 = a, ns - a
        if j1 <= j0 or k1 <= k0:
            continue
        centre = psi[j0:j1, k0:k1]
        fwd = psi[j0 + b : j1 + b, k0 + a : k1 + a]
        bwd = psi[j0 - b : j1 - b, k0 - a : k1 - a]
        dd = (fwd - 2.0 * centre + bwd) / ((a * h) ** 2 + (b * tau) ** 2)
        idx = np.unravel_index(int(np.argmin(dd)), dd.shape)
        val = float(dd[idx])
        if val < best:
            best = val
            where = (int(idx[0] + j0), int(idx[1] + k0), (a, b))
    pss = (psi[1:-1, 2:] - 2 * psi[1:-1, 1:-1] + psi[1:-1, :-2]) / h**2
    ptt = (psi[2:, 1:-1] - 2 * psi[1:-1, 1:-1] + psi[:-2, 1:-1]) / tau**2
    pst = (psi[2:, 2:] - psi[2:, :-2] - psi[:-2, 2:] + psi[:-2, :-2]) / (4 * h * tau)
    det = pss * ptt - pst**2
    min_det = float(np.min(det)) if det.size else 0.0
    return JointConvexityReport(best, where, min_det)


def quantized_family(
    segment: Sequence[ReducedPotential],
    beta: float,
    times: Sequence[float] | None = None,
    check_input: bool = True,
    tol_psh: float = TOL_PSH,
    **solver,
) -> list[QuantizationResult]:
    """Quantize every slice of a (sub)geodesic segment.

    When ``check_input`` is set the segment must itself pass the joint
    convexity test; a family that fails is rejected with
    :class:`InadmissibleInput` rather than quantized.
    """
    if times is None:
        times = np.linspace(0.0, 1.0, len(segment))
    if check_input and len(segment) >= 3:
        rep = joint_convexity(times, segment)
        if not rep.passes(tol_psh):
            raise InadmissibleInput(
                f"input family is not subgeodesic: min directional second difference "
                f"{rep.min_directional:.3e} at {rep.argmin}"
            )
    return [quantize(u, beta, **solver) for u in segment]


__all__ = [
    "JointConvexityReport",
    "QuantizationResult",
    "STENCIL",
    "joint_convexity",
    "quantize",
    "quantized_family",
]
