"""Exact interval masses and two-sided regularity scans.

Masses are rationals.  For the limit measure mu, every level-N cell
[a, a + 1/Psi(N)) with a in A_N carries mass exactly 1/T_N, so the cells a
query interval contains (resp. meets) bracket mu(I) from below (resp. above).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .tree import CantorTree


@dataclass(frozen=True)
class IntervalQuery:
    """Closed interval [center - halfwidth, center + halfwidth]."""

    center: Fraction
    halfwidth: Fraction

    def __post_init__(self):
        object.__setattr__(self, "center", Fraction(self.center))
        object.__setattr__(self, "halfwidth", Fraction(self.halfwidth))
        if self.halfwidth <= 0:
            raise ConfigError("halfwidth must be positive")
        if not 0 <= self.center <= 1:
            raise ConfigError("center must lie in [0, 1]")

    @classmethod
    def from_endpoints(cls, lo, hi) -> "IntervalQuery":
        lo, hi = Fraction(lo), Fraction(hi)
        return cls((lo + hi) / 2, (hi - lo) / 2)

    @property
    def lo(self) -> Fraction:
        return self.center - self.halfwidth

    @property
    def hi(self) -> Fraction:
        return self.center + self.halfwidth

    @property
    def length(self) -> Fraction:
        return 2 * self.halfwidth

    def aligned_level(self, tree: CantorTree) -> int | None:
        """Least built level whose grid contains both endpoints."""
        for N in range(tree.depth + 1):
            Psi = tree.schedule.Psi[N]
            if (self.lo * Psi).denominator == 1 and (self.hi * Psi).denominator == 1:
                return N
        return None


def _count_in(nodes: np.ndarray, first: int, last: int) -> int:
    """#nodes with first <= a <= last."""
    if last < first:
        return 0
    return int(np.searchsorted(nodes, last, side="right") - np.searchsorted(nodes, first, side="left"))


def _has(nodes: np.ndarray, a: int) -> bool:
    i = np.searchsorted(nodes, a)
    return bool(i < len(nodes) and nodes[i] == a)


def measure_of_interval(tree: CantorTree, N: int, I: IntervalQuery) -> Fraction:
    """mu_N(I) exactly: full cells count 1/T_N, boundary cells their covered fraction."""
    s = tree.schedule
    Psi, T = s.Psi[N], s.T[N]
    nodes = tree.nodes(N)
    lo, hi = max(I.lo, Fraction(0)) * Psi, min(I.hi, Fraction(1)) * Psi
    if hi <= lo:
        return Fraction(0)
    a_lo, a_hi = math.floor(lo), math.ceil(hi) - 1
    if a_lo == a_hi:
        return (hi - lo) / T if _has(nodes, a_lo) else Fraction(0)
    total = Fraction(_count_in(nodes, a_lo + 1, a_hi - 1))
    if _has(nodes, a_lo):
        total += (a_lo + 1) - lo
    if _has(nodes, a_hi):
        total += hi - a_hi
    return total / T


def bracket_limit_measure(tree: CantorTree, N: int, I: IntervalQuery) -> tuple[Fraction, Fraction]:
    """(cells of level N inside I, cells of level N meeting I) / T_N; brackets mu(I)."""
    s = tree.schedule
    Psi, T = s.Psi[N], s.T[N]
    nodes = tree.nodes(N)
    lo, hi = I.lo * Psi, I.hi * Psi
    inside = _count_in(nodes, math.ceil(lo), math.floor(hi) - 1)
    # a closed interval meets the cell [a, a+1) iff a <= hi and a + 1 > lo
    meeting = _count_in(nodes, math.floor(lo), math.floor(hi))
    return Fraction(inside, T), Fraction(meeting, T)


def limit_measure_of_interval(tree: CantorTree, I: IntervalQuery) -> Fraction:
    """mu(I) exactly for an interval whose endpoints lie on a built grid."""
    N = I.aligned_level(tree)
    if N is None:
        raise ConfigError("interval endpoints are not grid-aligned at any built level; use measure_of_interval")
    s = tree.schedule
    Psi = s.Psi[N]
    lo, hi = max(I.lo, Fraction(0)) * Psi, min(I.hi, Fraction(1)) * Psi
    return Fraction(_count_in(tree.nodes(N), int(lo), int(hi) - 1), s.T[N])


ENVELOPE_KINDS = ("power-over-log", "pure-power")


def _log_inv(length: Fraction) -> float:
    return math.log(length.denominator) - math.log(length.numerator)


def envelopes(tree: CantorTree, length: Fraction) -> tuple[float, float]:
    """(lower, upper) regularity envelopes at interval length |I| < 1/2."""
    s = tree.schedule
    a = s.alpha
    power = math.exp(a * (math.log(length.numerator) - math.log(length.denominator)))
    L = _log_inv(length)
    if s.variant == "thm2":
        return power / L, power / L
    if s.variant == "thm3":
        return power, power
    phi = s.phi(length.denominator / length.numerator)
    if s.variant == "thm1":
        return power / (phi * L), power / L
    return power / phi, power


def envelope_kind(tree: CantorTree) -> str:
    return "pure-power" if tree.schedule.variant in ("thm3", "thm1-second-part") else "power-over-log"


@dataclass
class RegularitySample:
    scale: int
    center: Fraction
    halfwidth: Fraction
    mass_lower: Fraction
    mass_upper: Fraction
    ratio_lower: float
    ratio_upper: float
    centered: bool
    contains_cell: bool


@dataclass
class RegularityReport:
    envelope: str
    delta: dict
    samples: list[RegularitySample] = field(default_factory=list)

    @property
    def band_lower(self) -> float:
        return min(x.ratio_lower for x in self.samples if x.centered)

    @property
    def band_upper(self) -> float:
        return max(x.ratio_upper for x in self.samples)

    @property
    def width(self) -> float:
        return self.band_upper / self.band_lower

    def per_scale(self) -> dict[int, tuple[float, float]]:
        out: dict[int, tuple[float, float]] = {}
        for x in self.samples:
            lo, hi = out.get(x.scale, (math.inf, 0.0))
            if x.centered:
                lo = min(lo, x.ratio_lower)
            out[x.scale] = (lo, max(hi, x.ratio_upper))
        return out

    def write_csv(self, path, header: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header is not None:
                fh.write("# " + json.dumps(header, default=str) + "\n")
            w = csv.writer(fh)
            w.writerow(["scale", "length", "center", "mass_num", "mass_den", "mass_upper_num", "mass_upper_den",
                        "ratio_lower", "ratio_upper", "centered"])
            for x in self.samples:
                w.writerow([x.scale, str(2 * x.halfwidth), str(x.center), x.mass_lower.numerator,
                            x.mass_lower.denominator, x.mass_upper.numerator, x.mass_upper.denominator,
                            x.ratio_lower, x.ratio_upper, int(x.centered)])

    def summary(self) -> dict:
        return {
            "envelope": self.envelope,
            "bandLower": self.band_lower,
            "bandUpper": self.band_upper,
            "width": self.width,
            "samples": len(self.samples),
            "delta": {str(k): v for k, v in self.delta.items()},
        }


def proxy_margin(tree: CantorTree, N: int) -> int:
    """Least margin D with Psi(N+D) >= 32 Psi(N+1): the proxy center then sits within |I|/128 of E."""
    s = tree.schedule
    D = 1
    while N + D <= s.levels and s.Psi[N + D] < 32 * s.Psi[N + 1]:
        D += 1
    return D


def regularity_scan(
    tree: CantorTree,
    depth: int | None = None,
    samples_per_scale: int = 32,
    delta: int | None = None,
    seed: int = 0,
    first_scale: int | None = None,
) -> RegularityReport:
    """Sample intervals centered near E at every scale and tabulate envelope ratios.

    At scale N the halfwidth runs over [1/Psi(N+1), 1/Psi(N)) and the center is
    the midpoint of a random level-(N+delta) cell.  Masses are bracketed at the
    deepest built level.  Uncentered intervals at random grid positions enter
    the upper band only.
    """
    s = tree.schedule
    rng = np.random.default_rng(seed)
    D = tree.depth
    first = s.start_level + 1 if first_scale is None else first_scale
    margins = {}
    report = RegularityReport(envelope_kind(tree), margins)
    last = D if depth is None else depth
    for N in range(first, last + 1):
        dN = proxy_margin(tree, N) if delta is None else delta
        if N + dN > D:
            if depth is None:
                break
            raise ConfigError(f"scale {N} needs depth {N + dN}, tree has {D}")
        margins[N] = dN
        deep = tree.nodes(N + dN)
        Pd = s.Psi[N + dN]
        psi_next = s.psi[N + 1]
        for i in range(samples_per_scale):
            # halfwidths spread over [1/Psi(N+1), 1/Psi(N))
            h = Fraction(samples_per_scale + i * (psi_next - 1), samples_per_scale * s.Psi[N + 1])
            for centered in (True, False):
                if centered:
                    a = int(deep[rng.integers(len(deep))])
                else:
                    a = int(rng.integers(Pd))
                c = Fraction(2 * a + 1, 2 * Pd)
                I = IntervalQuery(c, h)
                if I.length >= Fraction(1, 2) or I.lo < 0 or I.hi > 1:
                    continue
                m_lo, m_hi = bracket_limit_measure(tree, D, I)
                env_lo, env_hi = envelopes(tree, I.length)
                contains = False
                if centered:
                    anc = a // (Pd // s.Psi[N + 1])
                    cell_lo, cell_hi = Fraction(anc, s.Psi[N + 1]), Fraction(anc + 1, s.Psi[N + 1])
                    contains = I.lo <= cell_lo and cell_hi <= I.hi
                report.samples.append(
                    RegularitySample(N, c, h, m_lo, m_hi, float(m_lo) / env_lo, float(m_hi) / env_hi, centered, contains)
                )
    if not report.samples:
        raise ConfigError("no scale could be scanned; build the tree deeper")
    return report
