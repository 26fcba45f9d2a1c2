"""Fourier coefficients of the step measures mu_N and their decay certificates.

mu_N is uniform on E_N, the union of the cells [a, a + 1/Psi(N)) for a in
A_N, so

    mu_N^(xi) = T_N^{-1} S_{A_N}(xi) K(xi / Psi(N)),
    K(u) = exp(-pi i u) sin(pi u) / (pi u).

The limit measure is never formed; statements about it go through the
deepest built level plus :func:`tail_certificate`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.fft

from .errors import ConfigError
from .schedule import BranchingSchedule
from .tree import CantorTree, exp_sum

ENVELOPES = ("pure-power", "power-times-sqrt-log")


def box_kernel(u):
    """Fourier transform of Psi * 1_[0, 1/Psi) at xi = u * Psi; K(0) = 1."""
    u = np.asarray(u, dtype=np.float64)
    small = np.abs(u) < 1e-8
    safe = np.where(small, 1.0, u)
    sinc = np.where(small, 1.0 - (np.pi * u) ** 2 / 6.0, np.sin(np.pi * safe) / (np.pi * safe))
    sinc = np.where((u == np.round(u)) & ~small, 0.0, sinc)
    return np.exp(-1j * np.pi * u) * sinc


@dataclass(frozen=True)
class StepMeasure:
    tree: CantorTree
    level: int

    def __post_init__(self):
        if not 0 <= self.level <= self.tree.depth:
            raise ConfigError(f"level {self.level} not built (depth {self.tree.depth})")

    @property
    def Psi(self) -> int:
        return self.tree.schedule.Psi[self.level]

    @property
    def T(self) -> int:
        return self.tree.schedule.T[self.level]

    @property
    def nodes(self) -> np.ndarray:
        return self.tree.nodes(self.level)

    def total_mass(self) -> Fraction:
        # density Psi/T on T cells of length 1/Psi
        return Fraction(self.Psi, self.T) * Fraction(len(self.nodes), self.Psi)

    def cdf_on_grid(self, j, denom: int) -> np.ndarray:
        """F_N(j / denom) for integer ``j``; exact when Psi(N) divides ``denom``."""
        j = np.asarray(j, dtype=np.int64)
        if denom % self.Psi:
            x = j / denom * self.Psi
            cell = np.floor(x).astype(np.int64)
            part = x - cell
        else:
            ratio = denom // self.Psi
            cell = j // ratio
            part = (j % ratio) / ratio
        below = np.searchsorted(self.nodes, cell)
        inside = (below < len(self.nodes)) & (self.nodes[np.minimum(below, len(self.nodes) - 1)] == cell)
        return (below + np.where(inside, part, 0.0)) / self.T

    def cdf(self, x) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        y = x * self.Psi
        cell = np.floor(y).astype(np.int64)
        below = np.searchsorted(self.nodes, cell)
        inside = (below < len(self.nodes)) & (self.nodes[np.minimum(below, len(self.nodes) - 1)] == cell)
        return (below + np.where(inside, y - cell, 0.0)) / self.T


def measure_fourier(m: StepMeasure, xi) -> complex:
    if xi == 0:
        return 1.0 + 0j
    return exp_sum(m.nodes, m.Psi, xi) * complex(box_kernel(xi / m.Psi)) / m.T


def dense_exp_sums(nodes: np.ndarray, Psi: int, workers: int = 1) -> np.ndarray:
    """S(k) for k = 0..Psi-1 via one length-Psi transform."""
    ind = np.zeros(Psi, dtype=np.float64)
    ind[nodes] = 1.0
    return scipy.fft.fft(ind, workers=workers)


def fourier_on_integers(m: StepMeasure, ks) -> np.ndarray:
    """mu_N^(k) for integer k (any range), via the periodic exponential sum."""
    ks = np.asarray(ks, dtype=np.int64)
    S = dense_exp_sums(m.nodes, m.Psi, m.tree.workers)
    return S[ks % m.Psi] * box_kernel(ks / m.Psi) / m.T


def envelope(kind: str, exponent: float, k) -> np.ndarray:
    k = np.abs(np.asarray(k, dtype=np.float64))
    if kind == "pure-power":
        return k ** (-exponent)
    if kind == "power-times-sqrt-log":
        return k ** (-exponent) * np.sqrt(np.log(k))
    raise ConfigError(f"unknown envelope {kind!r}")


def default_envelope(s: BranchingSchedule) -> tuple[str, float]:
    if s.variant == "thm2":
        return "pure-power", s.alpha / 2
    if s.variant == "thm3":
        return "power-times-sqrt-log", s.alpha / 2
    return "pure-power", s.beta / 2


@dataclass(frozen=True)
class DecayReport:
    envelope: str
    exponent: float
    level: int
    seed: int
    k: np.ndarray
    coeff: np.ndarray
    k_min: int = 1

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.coeff)

    @property
    def envelope_values(self) -> np.ndarray:
        return envelope(self.envelope, self.exponent, self.k)

    @property
    def ratios(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.abs / self.envelope_values

    @property
    def sup_constant(self) -> float:
        sel = self.k >= self.k_min
        return float(self.ratios[sel].max())

    def block_maxima(self) -> list[tuple[int, float]]:
        """Max ratio over each dyadic block [2^j, 2^(j+1)) that lies past k_min."""
        out = []
        r = self.ratios
        j = max(1, int(math.floor(math.log2(self.k_min))))
        while 2 ** j <= self.k[-1]:
            sel = (self.k >= 2 ** j) & (self.k < 2 ** (j + 1))
            if sel.any():
                out.append((j, float(r[sel].max())))
            j += 1
        return out

    def write_csv(self, path, header: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header is not None:
                fh.write("# " + json.dumps(header, default=str) + "\n")
            w = csv.writer(fh)
            w.writerow(["k", "re", "im", "abs", "envelope", "ratio"])
            for row in zip(self.k.tolist(), self.coeff.real, self.coeff.imag, self.abs, self.envelope_values, self.ratios):
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])

    def summary(self) -> dict:
        return {
            "envelope": self.envelope,
            "exponent": self.exponent,
            "level": self.level,
            "seed": self.seed,
            "k_max": int(self.k[-1]),
            "supConstant": self.sup_constant,
        }


def decay_profile(
    m: StepMeasure,
    k_max: int | None = None,
    kind: str | None = None,
    exponent: float | None = None,
    k_min: int | None = None,
) -> DecayReport:
    """|mu_N^(k)| for 1 <= k <= k_max against the construction's envelope."""
    s = m.tree.schedule
    dk, de = default_envelope(s)
    kind = kind or dk
    exponent = de if exponent is None else exponent
    k_max = m.Psi // 4 if k_max is None else k_max
    ks = np.arange(1, k_max + 1, dtype=np.int64)
    coeff = fourier_on_integers(m, ks)
    if k_min is None:
        k_min = 2 if kind == "power-times-sqrt-log" else 1
    return DecayReport(kind, exponent, m.level, m.tree.seed, ks, coeff, k_min=k_min)


def level_bound(s: BranchingSchedule, n: int) -> float:
    """Accepted bound on |T_{n-1}^{-1} sum chi~| at level n."""
    return s.threshold(n) + s.correction(n)


def _decay_rate(s: BranchingSchedule) -> float:
    gamma = s.alpha if s.variant in ("thm2", "thm3") else s.beta
    return gamma / 2


def tail_certificate(s: BranchingSchedule, N: int, k: int) -> float:
    """Upper bound for |mu^(k) - mu_N^(k)| from the per-level acceptance bounds.

    Levels N+1..levels contribute min(1, Psi(n)/|k|) * bound(n).  Past the last
    scheduled level the bounds are extrapolated geometrically from the last
    level at rate psi^(-gamma/2), inflated by the schedule's observed band and
    by the sqrt(log) drift of the threshold; this closure term is a model of
    the unbuilt levels, not a proof about them.
    """
    if k == 0:
        raise ConfigError("k must be nonzero")
    k = abs(k)
    total = 0.0
    for n in range(N + 1, s.levels + 1):
        total += min(1.0, s.Psi[n] / k) * level_bound(s, n)
    L = s.levels
    band = s.band()
    spread = math.exp(band["theta_log_max"] - band["theta_log_min"])
    rho = s.psi[L] ** (-_decay_rate(s)) * math.sqrt((L + 1) / L)
    if rho >= 1:
        return math.inf
    lead = level_bound(s, L) * math.sqrt(spread) * rho
    # after the last level min(1, Psi/k) <= 1
    return total + lead / (1 - rho)


def restricted_nodes(tree: CantorTree, l: int, N: int) -> np.ndarray:
    """Level-N nodes whose level-l ancestor lies in P_l (numerators over Psi(N))."""
    s = tree.schedule
    if not s.has_progression:
        raise ConfigError("restricted measures need a progression variant")
    if not (s.start_level < l < N <= tree.depth):
        raise ConfigError(f"need N0 < l < N <= depth, got l={l}, N={N}, N0={s.start_level}, depth={tree.depth}")
    scale = s.Psi[N] // s.Psi[l]
    nodes = tree.nodes(N)
    return nodes[np.isin(nodes // scale, tree.progression(l))]


def restricted_fourier(tree: CantorTree, l: int, N: int, xi) -> complex:
    """Fourier transform of f_l mu_N, f_l the indicator of the level-l progression cells."""
    s = tree.schedule
    pts = restricted_nodes(tree, l, N)
    if xi == 0:
        return complex(len(pts) / s.T[N])
    return exp_sum(pts, s.Psi[N], xi) * complex(box_kernel(xi / s.Psi[N])) / s.T[N]


def cdf_gap(tree: CantorTree, N: int) -> float:
    """sup |F_{N+1} - F_N| over the level-(N+1) grid, which contains every breakpoint of both."""
    fine = StepMeasure(tree, N + 1)
    coarse = StepMeasure(tree, N)
    j = np.arange(fine.Psi + 1, dtype=np.int64)
    return float(np.abs(fine.cdf_on_grid(j, fine.Psi) - coarse.cdf_on_grid(j, fine.Psi)).max())
