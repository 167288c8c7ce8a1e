"""Exact rational formulas on a common snc model and on toric data.

All arithmetic uses :class:`fractions.Fraction`.  Floats only appear when a
result is compared against the numeric modules.

Component data for a model ``Z -> X x C``:

* ``a_i``: multiplicity of ``E_i`` in the central fiber ``Z_0 = sum a_i E_i``;
* ``b_i``, ``c_i``: coefficients of the divisors ``F``, ``G`` that encode the
  two test configurations;
* ``d_i``: coefficients of the relative canonical divisor.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import EmptyData, ZeroVolume
from .rays import ToricTestConfig, parse_assignments, parse_rational_list


def _fractions(vals: Sequence) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in vals)


@dataclass(frozen=True)
class SncModelData:
    a: tuple[int, ...]
    b: tuple[Fraction, ...]
    c: tuple[Fraction, ...]
    d: tuple[Fraction, ...]

    def __post_init__(self):
        a = tuple(Fraction(v) for v in self.a)
        if any(v.denominator != 1 or v < 1 for v in a):
            raise ValueError("multiplicities a_i must be integers >= 1")
        object.__setattr__(self, "a", tuple(int(v) for v in a))
        for key in ("b", "c", "d"):
            object.__setattr__(self, key, _fractions(getattr(self, key)))
        lengths = {len(self.a), len(self.b), len(self.c), len(self.d)}
        if len(lengths) != 1:
            raise ValueError("a, b, c, d must have equal length")
        if len(self.a) == 0:
            raise EmptyData("snc data needs at least one component")

    @classmethod
    def parse(cls, text: str) -> "SncModelData":
        """Parse ``a = [1,1]; b = [0, 1/2]; c = [0,0]; d = [0,1]``."""
        kv = parse_assignments(text)
        missing = {"a", "b", "c", "d"} - set(kv)
        if missing:
            raise ValueError(f"missing keys {sorted(missing)}")
        extra = set(kv) - {"a", "b", "c", "d"}
        if extra:
            raise ValueError(f"unknown keys {sorted(extra)}")
        vals = {k: parse_rational_list(kv[k]) for k in "abcd"}
        if any(len(v) == 0 for v in vals.values()):
            raise EmptyData("snc data needs at least one component")
        return cls(vals["a"], vals["b"], vals["c"], vals["d"])

    def __len__(self) -> int:
        return len(self.a)

    def __str__(self) -> str:
        def fmt(vs):
            return "[" + ", ".join(str(v) for v in vs) + "]"

        return f"a = {fmt(self.a)}; b = {fmt(self.b)}; c = {fmt(self.c)}; d = {fmt(self.d)}"


@dataclass(frozen=True)
class IntersectionData:
    """Intersection numbers for the slope formulas (``n`` is the dimension)."""

    lbar_pow: Fraction
    lbar_prime_pow: Fraction
    kx_dot_lbar: Fraction
    sbar: Fraction
    v: Fraction
    n: int

    def __post_init__(self):
        for key in ("lbar_pow", "lbar_prime_pow", "kx_dot_lbar", "sbar", "v"):
            object.__setattr__(self, key, Fraction(getattr(self, key)))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("dimension n must be an integer >= 1")
        if self.v <= 0:
            raise ZeroVolume(f"volume must be positive, got {self.v}")


def _as_fraction(beta) -> Fraction:
    b = Fraction(beta)
    if b <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return b


def component_values(data: SncModelData, beta) -> tuple[Fraction, ...]:
    """``((d_i + 1 - a_i) + beta (c_i - b_i)) / a_i`` for every component."""
    b = _as_fraction(beta)
    return tuple(
        ((di + 1 - ai) + b * (ci - bi)) / ai for ai, bi, ci, di in zip(data.a, data.b, data.c, data.d)
    )


def l_beta_snc(data: SncModelData, beta) -> tuple[Fraction, tuple[int, ...]]:
    """Exact minimum over components and every index attaining it."""
    if len(data) == 0:
        raise EmptyData("no components")
    vals = component_values(data, beta)
    low = min(vals)
    return low, tuple(i for i, v in enumerate(vals) if v == low)


def lct_shift(data: SncModelData, beta) -> Fraction:
    """``lct - 1`` of the central fiber against the boundary divisor.

    The boundary divisor has coefficients ``beta (b_i - c_i) - d_i``; adding
    ``(1 + tau) Z_0`` keeps every coefficient below 1 exactly when
    ``tau`` is below each component's threshold
    ``(1 - beta (b_i - c_i) + d_i) / a_i - 1``.
    """
    if len(data) == 0:
        raise EmptyData("no components")
    b = _as_fraction(beta)
    thresholds = []
    for ai, bi, ci, di in zip(data.a, data.b, data.c, data.d):
        boundary = b * (bi - ci) - di
        thresholds.append((1 - boundary) / ai - 1)
    return min(thresholds)


def i_slope_from_intersections(data: IntersectionData) -> Fraction:
    """``(L'^{n+1} - L^{n+1}) / ((n+1) V)``: the I-slope difference of the two rays."""
    return (data.lbar_prime_pow - data.lbar_pow) / ((data.n + 1) * data.v)


def j_ric_slope_from_intersections(data: IntersectionData) -> Fraction:
    """``-S L^{n+1} / ((n+1) V) - K_X . L^n / V``."""
    return -data.sbar * data.lbar_pow / ((data.n + 1) * data.v) - data.kx_dot_lbar / data.v


def df_toric(g: ToricTestConfig) -> Fraction:
    """Donaldson-Futaki invariant of the toric configuration: ``g(0) + g(1) - 2 int g``."""
    # the constructor already rejects non-convex slope sequences
    return g.value(0) + g.value(1) - 2 * g.integral()


def toric_intersections(g: ToricTestConfig, lbar_prime_pow=0) -> IntersectionData:
    """Intersection data implied by ``g`` on the sphere (``S = 2``, ``V = 1``, ``n = 1``).

    For a normalized ``g`` the self-intersection is ``-2 (int g - min g)`` and
    ``K_X . L`` vanishes, so the two slope formulas reproduce the toric
    I- and J-slopes.
    """
    gap = g.integral() - g.min_value()
    return IntersectionData(-2 * gap, Fraction(lbar_prime_pow), Fraction(0), Fraction(2), Fraction(1), 1)


def k_beta_tc_candidate(
    candidate: SncModelData,
    intersections: IntersectionData,
    beta,
    g: ToricTestConfig | None = None,
) -> Fraction:
    """Lower bound for the radial K^beta slope from one candidate divisor ``G``.

    Value: ``l_beta_snc(candidate) + beta * I-slope difference - J_Ric-slope``.
    When ``g`` is supplied the intersection data is checked against it.
    """
    b = _as_fraction(beta)
    if g is not None:
        expected = toric_intersections(g)
        if (intersections.lbar_pow, intersections.kx_dot_lbar) != (expected.lbar_pow, expected.kx_dot_lbar):
            raise ValueError("intersection data is inconsistent with the supplied configuration")
    lb, _ = l_beta_snc(candidate, b)
    return lb + b * i_slope_from_intersections(intersections) - j_ric_slope_from_intersections(intersections)


# ---------------------------------------------------------------------------
# The worked deformation-to-the-normal-cone example
# ---------------------------------------------------------------------------

DNC_C = Fraction(1, 2)


def dnc_config(c=DNC_C) -> ToricTestConfig:
    """Toric data of the degeneration to the normal cone of a pole: ``g = max(0, x - (1 - c))``."""
    c = Fraction(c)
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    return ToricTestConfig((1 - c,), (Fraction(0), Fraction(1)))


def dnc_snc(c=DNC_C, c_prime=0) -> SncModelData:
    """Two components: the strict transform (a=1, d=0) and the exceptional curve (a=1, d=1).

    ``F = c E`` encodes the configuration, ``G = c' E`` the candidate.
    """
    return SncModelData((1, 1), (0, Fraction(c)), (0, Fraction(c_prime)), (0, 1))


def dnc_intersections(c=DNC_C, c_prime=0) -> IntersectionData:
    """``L^2 = -c^2``, ``L'^2 = -c'^2``, ``K_X . L = 0`` on the sphere."""
    c, cp = Fraction(c), Fraction(c_prime)
    return IntersectionData(-c * c, -cp * cp, Fraction(0), Fraction(2), Fraction(1), 1)


def dnc_candidate_sweep(beta, scalings: Sequence = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)), c=DNC_C):
    """Candidate values for ``G = (lambda c) E`` over the given scalings."""
    out = []
    for lam in scalings:
        cp = Fraction(lam) * Fraction(c)
        val = k_beta_tc_candidate(dnc_snc(c, cp), dnc_intersections(c, cp), beta, g=dnc_config(c))
        out.append((Fraction(lam), val))
    return out


def format_fraction(x: Fraction) -> str:
    """``-1`` or ``3/8``, followed by nothing; decimals are added by callers."""
    return str(Fraction(x))


__all__ = [
    "DNC_C",
    "IntersectionData",
    "SncModelData",
    "component_values",
    "df_toric",
    "dnc_candidate_sweep",
    "dnc_config",
    "dnc_intersections",
    "dnc_snc",
    "format_fraction",
    "i_slope_from_intersections",
    "j_ric_slope_from_intersections",
    "k_beta_tc_candidate",
    "l_beta_snc",
    "lct_shift",
    "toric_intersections",
]
