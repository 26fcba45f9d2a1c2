"""Level-by-level construction of the node sets A_N (and progression sets P_N).

Nodes at level N are stored as integer numerators over Psi(N), sorted.  Seed
levels up to the schedule's start level are deterministic; every later level
is drawn at random and accepted only if the exponential-sum bound holds over
a full period of frequencies.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from ._digits import isolate_progression, seed_digits
from .errors import AttemptCapExceeded, ConfigError, InvariantViolation
from .schedule import BranchingSchedule

log = logging.getLogger(__name__)

DEFAULT_ATTEMPT_CAP = 64
# dense transforms of length Psi(N) beyond this are refused (memory, not correctness)
MAX_DENSE_LENGTH = 1 << 27


def _frozen(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LevelNodes:
    level: int
    numerators: np.ndarray
    progression: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "numerators", _frozen(self.numerators))
        object.__setattr__(self, "progression", _frozen(self.progression))

    def __len__(self):
        return len(self.numerators)


@dataclass(frozen=True)
class VerificationRecord:
    level: int
    attempts: int
    sup_random: float
    threshold: float
    correction: float
    sup_modified: float

    def ok(self) -> bool:
        return self.sup_random <= self.threshold and self.sup_modified <= self.threshold + self.correction


@dataclass(frozen=True)
class CantorTree:
    schedule: BranchingSchedule
    seed: int
    levels: tuple[LevelNodes, ...]
    verification: tuple[VerificationRecord, ...] = ()
    workers: int = field(default=1, compare=False)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def nodes(self, N: int) -> np.ndarray:
        return self.levels[N].numerators

    def progression(self, N: int) -> np.ndarray:
        return self.levels[N].progression

    def record(self, N: int) -> VerificationRecord | None:
        for rec in self.verification:
            if rec.level == N:
                return rec
        return None

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.schedule.digest().encode())
        h.update(str(self.seed).encode())
        for lv in self.levels:
            h.update(lv.numerators.tobytes())
            h.update(b"|")
            h.update(lv.progression.tobytes())
        return h.hexdigest()[:16]


def level_rng(seed: int, N: int) -> np.random.Generator:
    """Independent stream per (seed, level); attempts at a level share the stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(N,))))


def exp_sum(numerators, Q: int, k) -> complex:
    """sum over n of exp(-2 pi i n k / Q).

    Integer ``k`` is reduced modulo ``Q`` exactly before any rounding, so the
    result is periodic in ``k`` to machine precision; real ``k`` is split into
    integer and fractional parts for the same reason.
    """
    n = np.asarray(numerators, dtype=np.int64)
    if n.size == 0:
        return 0j
    if isinstance(k, (int, np.integer)):
        k_int, frac = int(k), 0.0
    else:
        k_int = math.floor(k)
        frac = float(k) - k_int
    kr = k_int % Q
    if Q < (1 << 31):
        num = (n * kr) % Q
    else:
        num = np.array([(int(x) * kr) % Q for x in n], dtype=np.float64)
    phase = (num + n * frac) / Q
    return complex(np.exp(-2j * np.pi * phase).sum())


def _children_indicator(parents: np.ndarray, psi: int, length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.float64)
    out[(parents[:, None] * psi + np.arange(psi)).ravel()] = 1.0
    return out


def _chi_sup(weights: np.ndarray, T_prev: int, workers: int) -> float:
    """max over k in [0, Psi) of |DFT(weights)(k)| / T_{N-1}; weights are real so half the spectrum suffices."""
    spec = scipy.fft.rfft(weights, workers=workers)
    return float(np.abs(spec).max()) / T_prev


def chi_sum(tree: CantorTree, N: int, k) -> complex:
    """(1/T_{N-1}) sum_a chi~_a(k) evaluated directly from the stored level-N nodes."""
    s = tree.schedule
    parents = tree.nodes(N - 1)
    expanded = (parents[:, None] * s.psi[N] + np.arange(s.psi[N])).ravel()
    val = exp_sum(tree.nodes(N), s.Psi[N], k) / s.t[N] - exp_sum(expanded, s.Psi[N], k) / s.psi[N]
    return val / s.T[N - 1]


def seed_levels(s: BranchingSchedule, seed: int = 0, workers: int = 1) -> CantorTree:
    """Deterministic levels 0..N0 with E_{N0} compactly inside (0, 1)."""
    prog = s.has_progression
    levels = [LevelNodes(0, [0], [0] if prog else [])]
    for N in range(1, s.start_level + 1):
        psi, t, tau = s.psi[N], s.t[N], s.tau[N]
        if prog and t > psi - 2:
            raise ConfigError(f"seed level {N}: t={t} exceeds psi-2={psi - 2}")
        prev = levels[-1]
        pset = set(prev.progression.tolist())
        width = s.Psi[N - 1]
        children, pchildren = [], []
        for a in prev.numerators.tolist():
            in_p = a in pset
            digits = seed_digits(psi, t, tau, a == 0, a + 1 == width, in_p)
            children.extend(a * psi + d for d in digits)
            if in_p:
                pchildren.extend(a * psi + d for d in range(1, tau + 1))
        levels.append(LevelNodes(N, sorted(children), sorted(pchildren)))
    top = levels[-1].numerators
    if s.start_level > 0 and not (top[0] >= 1 and top[-1] + 1 < s.Psi[s.start_level]):
        raise InvariantViolation("seed levels do not keep E_N0 inside (0, 1)")
    return CantorTree(s, seed, tuple(levels), (), workers)


def extend_level(tree: CantorTree, rng: np.random.Generator, attempt_cap: int = DEFAULT_ATTEMPT_CAP) -> CantorTree:
    """Append one random level, resampling until the exponential-sum bound holds."""
    s = tree.schedule
    N = tree.depth + 1
    if N > s.levels:
        raise ConfigError(f"schedule has only {s.levels} levels")
    if N <= s.start_level:
        raise ConfigError(f"level {N} is a seed level (start level {s.start_level})")
    psi, t, tau = s.psi[N], s.t[N], s.tau[N]
    Psi, T_prev = s.Psi[N], s.T[N - 1]
    if Psi > MAX_DENSE_LENGTH:
        raise ConfigError(f"Psi({N}) = {Psi} is too large for a dense transform")
    parents = tree.nodes(N - 1)
    threshold = s.threshold(N)
    correction = s.correction(N)

    base = -_children_indicator(parents, psi, Psi) / psi
    offsets = np.arange(t)
    for attempt in range(1, attempt_cap + 1):
        x = rng.integers(0, psi, size=len(parents))
        digits = (x[:, None] + offsets) % psi
        children = parents[:, None] * psi + digits
        w = base.copy()
        w[children.ravel()] += 1.0 / t
        sup_random = _chi_sup(w, T_prev, tree.workers)
        if sup_random <= threshold:
            break
        log.debug("level %d attempt %d rejected: %.4g > %.4g", N, attempt, sup_random, threshold)
    else:
        raise AttemptCapExceeded(
            f"level {N}: no admissible draw in {attempt_cap} attempts (seed {tree.seed})", level=N, seed=tree.seed
        )

    prog_prev = tree.progression(N - 1)
    prog = np.empty(0, dtype=np.int64)
    sup_modified = sup_random
    if s.has_progression:
        if t > psi - 2:
            raise InvariantViolation(f"level {N}: isolation needs t <= psi-2")
        row = np.searchsorted(parents, prog_prev)
        for i in row.tolist():
            new = isolate_progression(digits[i].tolist(), psi, t, tau)
            children[i] = parents[i] * psi + np.asarray(new)
        prog = (prog_prev[:, None] * psi + np.arange(1, tau + 1)).ravel()
        w = base.copy()
        w[children.ravel()] += 1.0 / t
        sup_modified = _chi_sup(w, T_prev, tree.workers)

    rec = VerificationRecord(N, attempt, sup_random, threshold, correction, sup_modified)
    if not rec.ok():
        raise InvariantViolation(f"level {N}: modified sum {sup_modified:.4g} exceeds {threshold + correction:.4g}")
    nodes = np.sort(children.ravel())
    lv = LevelNodes(N, nodes, np.sort(prog))
    return CantorTree(s, tree.seed, tree.levels + (lv,), tree.verification + (rec,), tree.workers)


def build_tree(
    s: BranchingSchedule,
    seed: int,
    depth: int | None = None,
    attempt_cap: int = DEFAULT_ATTEMPT_CAP,
    workers: int = 1,
) -> CantorTree:
    depth = s.levels if depth is None else depth
    if depth < s.start_level:
        raise ConfigError(f"depth {depth} is below the start level {s.start_level}")
    tree = seed_levels(s, seed, workers)
    for N in range(s.start_level + 1, depth + 1):
        tree = extend_level(tree, level_rng(seed, N), attempt_cap)
    return tree


def verify_periodicity(tree: CantorTree, N: int, samples: int = 100, seed: int = 0, tol: float = 1e-9) -> bool:
    """chi-sum at random k outside one period equals its value at k mod Psi(N)."""
    Psi = tree.schedule.Psi[N]
    rng = np.random.default_rng(seed)
    for k in rng.integers(-10 * Psi, 10 * Psi, size=samples).tolist():
        if 0 <= k < Psi:
            k += Psi
        if abs(chi_sum(tree, N, k) - chi_sum(tree, N, k % Psi)) > tol:
            return False
    return True


def check_tree(tree: CantorTree) -> None:
    """Re-derive the structural invariants; raises InvariantViolation on the first failure."""
    s = tree.schedule
    if tree.nodes(0).tolist() != [0]:
        raise InvariantViolation("level 0 must be {0}")
    for N in range(1, tree.depth + 1):
        nodes, prev = tree.nodes(N), tree.nodes(N - 1)
        if len(nodes) != s.T[N]:
            raise InvariantViolation(f"level {N}: #A_N={len(nodes)} != T_N={s.T[N]}")
        if np.any(np.diff(nodes) <= 0):
            raise InvariantViolation(f"level {N}: numerators not strictly increasing")
        parents = nodes // s.psi[N]
        if not np.all(np.isin(parents, prev)):
            raise InvariantViolation(f"level {N}: node without parent")
        if np.any(np.bincount(np.searchsorted(prev, parents), minlength=len(prev)) != s.t[N]):
            raise InvariantViolation(f"level {N}: a parent does not have exactly t_N children")
        if s.has_progression:
            pp = tree.progression(N - 1)
            expect = np.sort((pp[:, None] * s.psi[N] + np.arange(1, s.tau[N] + 1)).ravel())
            if not np.array_equal(expect, tree.progression(N)):
                raise InvariantViolation(f"level {N}: progression differs from its recursion")
            if not np.all(np.isin(tree.progression(N), nodes)):
                raise InvariantViolation(f"level {N}: P_N not contained in A_N")
            for bad in (0, s.tau[N] + 1):
                if np.any(np.isin(pp * s.psi[N] + bad, nodes)):
                    raise InvariantViolation(f"level {N}: progression parent keeps digit {bad}")
    for rec in tree.verification:
        if not rec.ok():
            raise InvariantViolation(f"level {rec.level}: stored record violates its bound")


def recompute_record(tree: CantorTree, N: int) -> float:
    """sup over one period of the chi~ sum, recomputed from stored numerators."""
    s = tree.schedule
    w = -_children_indicator(tree.nodes(N - 1), s.psi[N], s.Psi[N]) / s.psi[N]
    w[tree.nodes(N)] += 1.0 / s.t[N]
    return _chi_sup(w, s.T[N - 1], tree.workers)
