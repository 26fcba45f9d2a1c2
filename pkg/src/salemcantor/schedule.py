"""Per-level branching schedules for the three Cantor-measure constructions.

A schedule fixes, for every level ``N``, the ambient branching number
``psi(N)``, the number ``t_N`` of digits kept per parent and (for the
progression variants) the progression width ``tau_N``.  Running products are
stored as exact Python integers.

Levels are indexed from 0; index 0 holds the empty-product sentinels
(``psi = t = tau = 1``).  ``psi`` is stored one level past ``levels`` because
the greedy targets look one level ahead.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
from mpmath.ctx_iv import MPIntervalContext

from ._digits import seed_digits
from .errors import ConfigError, InfeasibleScheduleError

VARIANTS = ("thm2", "thm3", "thm1", "thm1-second-part")
PHI_FAMILIES = ("log-power", "constant-plus-log-log", "user-table")

_PREC = 128

# private interval context so outward rounding never depends on global mpmath state
_iv = MPIntervalContext()
_iv.prec = _PREC


@dataclass(frozen=True)
class PhiSpec:
    family: str = "log-power"
    epsilon: float = 1.0
    constant: float = 2.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.family not in PHI_FAMILIES:
            raise ConfigError(f"unknown phi family {self.family!r}")
        if self.family == "log-power" and not self.epsilon > 0:
            raise ConfigError("log-power phi needs epsilon > 0")
        if self.family == "constant-plus-log-log" and self.constant + math.log(math.log(2)) <= 0:
            raise ConfigError("constant-plus-log-log phi must be positive on [2, inf)")
        if self.family == "user-table":
            if len(self.table) < 1:
                raise ConfigError("user-table phi needs at least one point")
            ts = [p[0] for p in self.table]
            vs = [p[1] for p in self.table]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ConfigError("user-table abscissae must be strictly increasing")
            if any(b < a for a, b in zip(vs, vs[1:])) or min(vs) <= 0:
                raise ConfigError("user-table values must be positive and nondecreasing")

    def evaluate(self, x) -> mpmath.mpf:
        """phi(x) at working precision; ``x`` may be an exact integer."""
        with mpmath.workprec(_PREC):
            x = mpmath.mpf(x)
            if x < 2:
                raise ConfigError("phi is defined on [2, inf)")
            if self.family == "log-power":
                return mpmath.log(x) ** mpmath.mpf(self.epsilon)
            if self.family == "constant-plus-log-log":
                return mpmath.mpf(self.constant) + mpmath.log(mpmath.log(x))
            pts = self.table
            if x <= pts[0][0]:
                return mpmath.mpf(pts[0][1])
            for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
                if x <= t1:
                    return mpmath.mpf(v0) + (mpmath.mpf(v1) - v0) * (x - t0) / (mpmath.mpf(t1) - t0)
            return mpmath.mpf(pts[-1][1])

    def __call__(self, x) -> float:
        return float(self.evaluate(x))

    def doubling_gap(self, xs: Sequence[float]) -> float:
        """max of phi(2x) - phi(x) over the query points."""
        return max(self(2 * x) - self(x) for x in xs)

    def descriptor(self) -> str:
        if self.family == "log-power":
            return f"log:{self.epsilon:g}"
        if self.family == "constant-plus-log-log":
            return f"loglog:{self.constant:g}"
        return "table:" + ",".join(f"{a:g}={b:g}" for a, b in self.table)

    @classmethod
    def parse(cls, text: str) -> "PhiSpec":
        kind, _, arg = text.partition(":")
        try:
            if kind == "log":
                return cls("log-power", epsilon=float(arg or 1.0))
            if kind == "loglog":
                return cls("constant-plus-log-log", constant=float(arg or 2.0))
            if kind == "table":
                pairs = []
                for item in arg.split(","):
                    a, _, b = item.partition("=")
                    pairs.append((float(a), float(b)))
                return cls("user-table", table=tuple(pairs))
        except ValueError as exc:
            raise ConfigError(f"bad phi descriptor {text!r}: {exc}") from None
        raise ConfigError(f"bad phi descriptor {text!r}")


def branching_number(phi: PhiSpec, N: int) -> int:
    """psi(N) = ceil(phi(2^N)^(1/2)) + 2."""
    with mpmath.workprec(_PREC):
        return int(mpmath.ceil(mpmath.sqrt(phi.evaluate(mpmath.mpf(2) ** N)))) + 2


def log_upper(n: int) -> mpmath.mpf:
    """Outward-rounded upper bound for log(n)."""
    return _iv.log(_iv.mpf(n)).b


def bernstein_feasible(T_prev: int, Psi_N: int) -> bool:
    """Certified check of 4 log(8 Psi(N)) <= T_{N-1}."""
    return 4 * log_upper(8 * Psi_N) <= T_prev


@dataclass(frozen=True)
class BranchingSchedule:
    variant: str
    alpha: float
    beta: float
    levels: int
    psi: tuple[int, ...]
    t: tuple[int, ...]
    tau: tuple[int, ...]
    band_start: int = 0
    start_level: int = 0
    phi: PhiSpec | None = None
    Psi: tuple[int, ...] = field(init=False, repr=False, compare=False)
    T: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if len(self.psi) != self.levels + 2 or len(self.t) != self.levels + 1 or len(self.tau) != self.levels + 1:
            raise ConfigError("schedule array lengths do not match levels")
        Psi = [1]
        for p in self.psi[1:]:
            Psi.append(Psi[-1] * p)
        T = [1]
        for x in self.t[1:]:
            T.append(T[-1] * x)
        object.__setattr__(self, "Psi", tuple(Psi))
        object.__setattr__(self, "T", tuple(T))

    @property
    def has_progression(self) -> bool:
        return self.variant in ("thm1", "thm1-second-part")

    def theta(self, N: int) -> float:
        return self.t[N] * self.psi[N] ** (-self.alpha)

    def vartheta(self, N: int) -> float:
        return self.tau[N] * self.psi[N] ** (self.beta / 2 - self.alpha)

    def tau_product(self, N: int) -> int:
        """#P_N = tau_1 ... tau_N (1 for the variants without progressions)."""
        if not self.has_progression:
            return 1
        return math.prod(self.tau[1:N + 1])

    def log_theta_product(self, N: int) -> float:
        return sum(math.log(self.theta(n)) for n in range(1, N + 1))

    def log_vartheta_product(self, N: int) -> float:
        return sum(math.log(self.vartheta(n)) for n in range(1, N + 1))

    def log_target(self, N: int) -> float:
        """log of the value the theta product is steered towards after level N."""
        if self.variant == "thm2":
            return math.log(math.log(2.0 ** N * 8))
        if self.variant == "thm3":
            return 0.0
        lead = self.alpha * math.log(self.psi[N + 1])
        if self.variant == "thm1":
            return lead + math.log(float(log_upper(8 * self.Psi[N + 1])))
        return lead

    def threshold(self, N: int) -> float:
        """Acceptance bound 4 T_{N-1}^{-1/2} log^{1/2}(8 Psi(N)) at level N."""
        return 4.0 * math.sqrt(math.log(8 * self.Psi[N]) / self.T[N - 1])

    def correction(self, N: int) -> float:
        """6 tau_1..tau_N / t_1..t_N (zero without progressions)."""
        if not self.has_progression:
            return 0.0
        return 6.0 * self.tau_product(N) / self.T[N]

    def band(self) -> dict:
        """Ratios of the running products to their targets over levels past the start level."""
        rows = range(self.start_level + 1, self.levels + 1)
        theta = [self.log_theta_product(N) - self.log_target(N) for N in rows]
        out = {"theta_log_min": min(theta, default=0.0), "theta_log_max": max(theta, default=0.0)}
        if self.has_progression:
            # tau_1..tau_N / T_N against Psi(N)^(-beta/2)
            want2 = [
                math.log(self.tau_product(N)) - math.log(self.T[N]) + self.beta / 2 * math.log(self.Psi[N])
                for N in rows
            ]
            out["want2_log_min"] = min(want2, default=0.0)
            out["want2_log_max"] = max(want2, default=0.0)
        return out

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "alpha": self.alpha,
            "beta": self.beta,
            "phi": self.phi.descriptor() if self.phi else None,
            "levels": self.levels,
            "psi": list(self.psi),
            "t": list(self.t),
            "tau": list(self.tau),
            "Psi": [str(x) for x in self.Psi],
            "T": [str(x) for x in self.T],
            "theta": [None] + [self.theta(n) for n in range(1, self.levels + 1)],
            "vartheta": [None] + [self.vartheta(n) if self.has_progression else 0.0 for n in range(1, self.levels + 1)],
            "band_start": self.band_start,
            "start_level": self.start_level,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BranchingSchedule":
        s = cls(
            variant=d["variant"],
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            levels=int(d["levels"]),
            psi=tuple(int(x) for x in d["psi"]),
            t=tuple(int(x) for x in d["t"]),
            tau=tuple(int(x) for x in d["tau"]),
            band_start=int(d["band_start"]),
            start_level=int(d["start_level"]),
            phi=PhiSpec.parse(d["phi"]) if d.get("phi") else None,
        )
        if "Psi" in d and [str(x) for x in s.Psi] != list(d["Psi"]):
            raise ConfigError("stored Psi does not match the product of psi")
        if "T" in d and [str(x) for x in s.T] != list(d["T"]):
            raise ConfigError("stored T does not match the product of t")
        return s

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")


def _greedy(log_running: float, options: Sequence[int], log_step, log_target: float) -> int:
    # ties go to the smaller integer because options are scanned in increasing order
    best, best_err = None, math.inf
    for x in options:
        err = abs(log_running + log_step(x) - log_target)
        if err < best_err - 1e-12:
            best, best_err = x, err
    return best


def min_start_level(s: BranchingSchedule) -> int:
    """Least N0 with 4 log(8 Psi(N)) <= T_{N-1} for every N in (N0, levels].

    At least one level past N0 must exist; otherwise the schedule is rejected.
    """
    n0 = 0
    for N in range(1, s.levels + 1):
        if not bernstein_feasible(s.T[N - 1], s.Psi[N]):
            n0 = N
    if n0 >= s.levels:
        raise InfeasibleScheduleError(
            f"Bernstein condition 4 log(8 Psi(N)) <= T_(N-1) fails at level {n0}; no room for random levels",
            level=n0,
        )
    return n0


def containment_level(s: BranchingSchedule) -> int:
    """First level at which the seed rule puts E_N strictly inside (0, 1).

    Only the extreme nodes matter: the leftmost (rightmost) child of the
    leftmost (rightmost) parent is the new extreme node.
    """
    prog = s.has_progression
    lo, lo_p = 0, prog
    hi, hi_p = 0, prog
    for N in range(1, s.levels + 1):
        psi, t, tau = s.psi[N], s.t[N], s.tau[N]
        single = s.T[N - 1] == 1
        width = s.Psi[N - 1]
        left_d = seed_digits(psi, t, tau, lo == 0, single and hi + 1 == width, lo_p)
        right_d = seed_digits(psi, t, tau, single and lo == 0, hi + 1 == width, hi_p)
        lo, lo_p = lo * psi + left_d[0], lo_p and 1 <= left_d[0] <= tau
        hi, hi_p = hi * psi + right_d[-1], hi_p and 1 <= right_d[-1] <= tau
        if lo >= 1 and hi + 1 < s.Psi[N]:
            return N
    raise InfeasibleScheduleError("seed rule never separates E_N from the endpoints", level=s.levels)


def _finish(s: BranchingSchedule) -> BranchingSchedule:
    n0 = max(min_start_level(s), containment_level(s))
    if n0 >= s.levels:
        raise InfeasibleScheduleError(f"start level {n0} leaves no random level", level=n0)
    return BranchingSchedule(
        s.variant, s.alpha, s.beta, s.levels, s.psi, s.t, s.tau, s.band_start, n0, s.phi
    )


def _binary_schedule(variant: str, alpha: float, levels: int, prefix: tuple[int, ...] = ()) -> BranchingSchedule:
    _check_alpha(alpha)
    if levels < 4:
        raise ConfigError("need at least 4 levels")
    psi = (1,) + (2,) * (levels + 1)
    step = lambda x: math.log(x) - alpha * math.log(2)  # noqa: E731
    probe = BranchingSchedule(variant, alpha, alpha, levels, psi, (1,) * (levels + 1), (0,) * (levels + 1))
    t = [1]
    running = 0.0
    for N in range(1, levels + 1):
        x = prefix[N - 1] if N <= len(prefix) else _greedy(running, (1, 2), step, probe.log_target(N))
        running += step(x)
        t.append(x)
    s = BranchingSchedule(variant, alpha, alpha, levels, psi, tuple(t), (0,) * (levels + 1))
    try:
        return _finish(s)
    except InfeasibleScheduleError:
        if prefix:
            raise
    # with t_N = 2 everywhere E_N stays [0, 1]; two single-child levels pull it inside
    return _binary_schedule(variant, alpha, levels, prefix=(1, 1))


def build_dyadic_schedule(alpha: float, levels: int) -> BranchingSchedule:
    """Binary tree with theta_1..theta_N tracking log(2^N 8)."""
    return _binary_schedule("thm2", alpha, levels)


def build_flat_schedule(alpha: float, levels: int) -> BranchingSchedule:
    """Binary tree with theta_1..theta_N tracking 1, so T_N ~ 2^(N alpha)."""
    return _binary_schedule("thm3", alpha, levels)


def build_general_schedule(alpha: float, beta: float, phi: PhiSpec, second_part: bool, levels: int) -> BranchingSchedule:
    """Growing-branching schedule carrying an embedded progression tree.

    ``t_N`` is steered towards psi(N+1)^alpha log(8 Psi(N+1)) (or psi(N+1)^alpha
    for ``second_part``); ``tau_N`` is steered so that the vartheta product
    follows the realised theta product, which keeps
    tau_1..tau_N / T_N close to Psi(N)^(-beta/2).
    """
    _check_alpha(alpha)
    if not 0 < beta <= alpha:
        raise ConfigError(f"need 0 < beta <= alpha, got beta={beta}, alpha={alpha}")
    if second_part and not beta < alpha:
        raise ConfigError("the second-part variant needs beta < alpha")
    if levels < 4:
        raise ConfigError("need at least 4 levels")
    variant = "thm1-second-part" if second_part else "thm1"
    psi = (1,) + tuple(branching_number(phi, n) for n in range(1, levels + 2))
    # band start: from here on every level offers at least two admissible t (psi >= 4)
    movable = [n for n in range(1, levels + 1) if psi[n] >= 4]
    if not movable:
        raise InfeasibleScheduleError(f"psi never reaches 4 up to level {levels}", level=levels)
    M = movable[0] - 1
    probe = BranchingSchedule(variant, alpha, beta, levels, psi, (1,) * (levels + 1), (1,) * (levels + 1), phi=phi)
    t, tau = [1], [1]
    log_theta = log_vartheta = 0.0
    for N in range(1, levels + 1):
        if N <= M:
            x = y = 1
        else:
            lp = math.log(psi[N])
            x = _greedy(log_theta, range(1, psi[N] - 1), lambda v: math.log(v) - alpha * lp, probe.log_target(N))
            new_theta = log_theta + math.log(x) - alpha * lp
            y = _greedy(log_vartheta, range(1, x + 1), lambda v: math.log(v) + (beta / 2 - alpha) * lp, new_theta)
        log_theta += math.log(x) - alpha * math.log(psi[N])
        log_vartheta += math.log(y) + (beta / 2 - alpha) * math.log(psi[N])
        t.append(x)
        tau.append(y)
    s = BranchingSchedule(variant, alpha, beta, levels, psi, tuple(t), tuple(tau), band_start=M, phi=phi)
    return _finish(s)


def _ceil_pow(n: int, alpha: float) -> int:
    v = n ** alpha
    m = round(v)
    if abs(v - m) > 1e-9:
        return math.ceil(v)
    # n^alpha is within rounding of an integer: decide the comparison at high precision
    with mpmath.workprec(_PREC):
        gap = mpmath.mpf(alpha) * mpmath.log(n) - mpmath.log(m)
    return m if gap <= mpmath.mpf(2) ** (-100) else m + 1


def rounding_drift_demo(alpha: float, L: int) -> float:
    """log of prod_{N<=L} ceil(N^alpha) / N^alpha."""
    _check_alpha(alpha)
    if L < 1:
        raise ConfigError("L must be positive")
    return math.fsum(math.log(_ceil_pow(n, alpha)) - alpha * math.log(n) for n in range(1, L + 1))
