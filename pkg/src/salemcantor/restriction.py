"""Additive energy, Salem's L^{2r} identity and the blow-up certificate below q0.

For a finite set F of numerators over Psi(N) let g(z) count r-tuples of F
summing to z.  The additive energy is M = sum g(z)^2, and the Fourier
transform of the restricted step measure f_l mu_N satisfies

    ||(f_l mu_N)^||_{2r}^{2r} = Psi(N) T_N^{-2r} sum_{|m|<r} corr(m) B_{2r}(m),

with corr(m) = sum_z g(z) g(z+m) and B_{2r} the 2r-fold self-convolution of
the indicator of [-1/2, 1/2).  Everything on that line is an exact rational.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import ConfigError, TailDivergentError
from .fourier import box_kernel, restricted_nodes
from .schedule import BranchingSchedule
from .tree import CantorTree

BRUTE_FORCE_GUARD = 10 ** 8
_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class EnergyInstance:
    points: tuple[int, ...]
    r: int
    l: int = 0
    N: int = 0

    def __post_init__(self):
        pts = tuple(sorted(int(p) for p in self.points))
        if not pts:
            raise ConfigError("energy instance needs at least one point")
        if len(set(pts)) != len(pts):
            raise ConfigError("points must be distinct")
        if self.r < 1:
            raise ConfigError("r must be a positive integer")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_tree(cls, tree: CantorTree, l: int, N: int, r: int) -> "EnergyInstance":
        return cls(tuple(restricted_nodes(tree, l, N).tolist()), r, l, N)

    def indicator(self) -> np.ndarray:
        """0/1 vector on the grid min(points)..max(points)."""
        p = np.asarray(self.points, dtype=np.int64)
        h = np.zeros(int(p[-1] - p[0]) + 1, dtype=np.int64)
        h[p - p[0]] = 1
        return h


# ---------------------------------------------------------------- brute force


def _tuple_sums(points, r: int) -> np.ndarray:
    p = np.asarray(points, dtype=np.int64)
    s = np.zeros(1, dtype=np.int64)
    for _ in range(r):
        s = (s[:, None] + p[None, :]).ravel()
    return s


def additive_energy(inst: EnergyInstance) -> int:
    """#{(a_1..a_2r): a_1+..+a_r = a_{r+1}+..+a_2r} by comparing every pair of r-tuples."""
    n, r = len(inst.points), inst.r
    if n ** (2 * r) > BRUTE_FORCE_GUARD:
        raise ConfigError(f"{n}^{2 * r} tuples exceed the brute-force guard; use energy_via_convolution")
    sums = _tuple_sums(inst.points, r)
    total = 0
    chunk = max(1, BRUTE_FORCE_GUARD // (10 * len(sums)))
    for i in range(0, len(sums), chunk):
        total += int((sums[i:i + chunk, None] == sums[None, :]).sum())
    return total


def enumerate_sumset(points, r: int) -> set[int]:
    """{a_1 + .. + a_r} by direct enumeration."""
    return {sum(c) for c in itertools.combinations_with_replacement(sorted(points), r)}


# ---------------------------------------------------------- exact convolution


def _as_int_list(a) -> list[int]:
    return [int(x) for x in a]


def _max_abs(a: np.ndarray) -> int:
    return max((abs(int(x)) for x in (a.max(), a.min())), default=0) if len(a) else 0


def _fft_convolve_rounded(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Float convolution rounded to integers, or None when the error budget is not met."""
    n = len(a) + len(b) - 1
    fa, fb = a.astype(np.float64), b.astype(np.float64)
    # componentwise error of an FFT product is at most about eps log2(n) ||a||_2 ||b||_2
    budget = 8 * _EPS * math.log2(max(n, 2)) * float(np.linalg.norm(fa)) * float(np.linalg.norm(fb))
    if budget >= 0.25:
        return None
    L = scipy.fft.next_fast_len(n, real=True)
    c = scipy.fft.irfft(scipy.fft.rfft(fa, L) * scipy.fft.rfft(fb, L), L)[:n]
    out = np.rint(c)
    if np.abs(c - out).max() > 0.25:
        return None
    return out.astype(np.int64)


def _split(a: np.ndarray, bits: int) -> list[np.ndarray]:
    mask = (1 << bits) - 1
    parts = []
    a = a.copy()
    while a.any():
        parts.append(a & mask)
        a >>= bits
    return parts or [a]


def exact_convolve(a, b) -> np.ndarray:
    """Exact convolution of nonnegative integer vectors.

    Small inputs go through np.convolve in int64; larger ones through rounded
    FFTs, splitting the inputs into limbs until the a-priori rounding budget
    holds.  The result is int64 when it fits, otherwise a Python-int object
    array.  A sum checksum guards every path.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.dtype == object or b.dtype == object:
        big = max(_max_abs(a), _max_abs(b)).bit_length() > 62
        if big:
            out = _object_convolve(a, b)
            _checksum(a, b, out)
            return out
        a, b = a.astype(np.int64), b.astype(np.int64)
    a, b = a.astype(np.int64), b.astype(np.int64)
    if (a < 0).any() or (b < 0).any():
        raise ConfigError("exact_convolve expects nonnegative vectors")
    ma, mb = int(a.max(initial=0)), int(b.max(initial=0))
    bound = ma * mb * min(len(a), len(b))
    if bound < (1 << 62) and len(a) * len(b) <= (1 << 22):
        out = np.convolve(a, b)
        _checksum(a, b, out)
        return out
    for bits in (62, 31, 24, 20, 16, 12, 8):
        pa, pb = _split(a, bits), _split(b, bits)
        pieces = {}
        ok = True
        for i, x in enumerate(pa):
            for j, y in enumerate(pb):
                c = _fft_convolve_rounded(x, y)
                if c is None:
                    ok = False
                    break
                pieces[i, j] = c
            if not ok:
                break
        if not ok:
            continue
        if bound < (1 << 62):
            out = np.zeros(len(a) + len(b) - 1, dtype=np.int64)
            for (i, j), c in pieces.items():
                out += c << (bits * (i + j))
        else:
            out = np.zeros(len(a) + len(b) - 1, dtype=object)
            for (i, j), c in pieces.items():
                out += c.astype(object) * (1 << (bits * (i + j)))
        _checksum(a, b, out)
        return out
    out = _object_convolve(a, b)
    _checksum(a, b, out)
    return out


def _object_convolve(a, b) -> np.ndarray:
    a, b = _as_int_list(a), _as_int_list(b)
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return np.array(out, dtype=object)


def _exact_sum(a: np.ndarray) -> int:
    if a.dtype != object and len(a) and int(a.max()) * len(a) < (1 << 62):
        return int(a.sum())
    return sum(_as_int_list(a))


def _checksum(a, b, out) -> None:
    if _exact_sum(out) != _exact_sum(a) * _exact_sum(b):
        raise ArithmeticError("convolution checksum failed")


def _int_dot(x: np.ndarray, y: np.ndarray) -> int:
    if x.dtype != object and y.dtype != object:
        mx, my = int(x.max(initial=0)), int(y.max(initial=0))
        if mx * my * len(x) < (1 << 62):
            return int(np.dot(x.astype(np.int64), y.astype(np.int64)))
    return int(np.dot(x.astype(object), y.astype(object)))


def tuple_sum_counts(inst: EnergyInstance) -> np.ndarray:
    """g(z) for z = r*min(points) .. r*max(points): #r-tuples with that sum."""
    h = inst.indicator()
    # binary powering keeps the number of large convolutions at O(log r)
    result, base, e = None, h, inst.r
    while e:
        if e & 1:
            result = base if result is None else exact_convolve(result, base)
        e >>= 1
        if e:
            base = exact_convolve(base, base)
    return result


def energy_via_convolution(inst: EnergyInstance) -> int:
    g = tuple_sum_counts(inst)
    return _int_dot(g, g)


def signed_sum_counts(inst: EnergyInstance, m_max: int) -> dict[int, int]:
    """corr(m) = #{2r-tuples with a_1+..+a_r - a_{r+1}-..-a_2r = m} for |m| <= m_max."""
    g = tuple_sum_counts(inst)
    out = {}
    for m in range(0, m_max + 1):
        val = _int_dot(g[m:], g[:len(g) - m]) if m < len(g) else 0
        out[m] = val
        out[-m] = val
    return out


# ----------------------------------------------------------------- B-splines


@lru_cache(maxsize=None)
def bspline_central(order2r: int, m: int) -> Fraction:
    """(1_[-1/2,1/2))^{*n}(m) for even n, exactly.

    Truncated-power form of the cardinal B-spline:
    B_n(x) = 1/(n-1)! sum_k (-1)^k C(n,k) (x + n/2 - k)_+^(n-1).
    """
    n = order2r
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
        raise ConfigError(f"order must be an even integer >= 2, got {order2r}")
    n, m = int(n), int(m)
    if abs(m) >= n // 2:
        return Fraction(0)
    x = m + n // 2
    total = sum((-1) ** k * math.comb(n, k) * (x - k) ** (n - 1) for k in range(0, x))
    return Fraction(total, math.factorial(n - 1))


# ------------------------------------------------------------ schedule bounds


def q_critical(alpha: float, beta: float) -> float:
    if not (0 < beta <= alpha < 1):
        raise ConfigError(f"need 0 < beta <= alpha < 1, got alpha={alpha}, beta={beta}")
    return 2 + 4 * (1 - alpha) / beta


def growth_exponent(alpha: float, beta: float, q: float) -> float:
    """e(q) = 1 - alpha q/2 + (alpha - beta/2)(q/2 - 1); vanishes at q0."""
    return 1 - alpha * q / 2 + (alpha - beta / 2) * (q / 2 - 1)


def _check_levels(s: BranchingSchedule, l: int, N: int, r: int, strict: bool = True):
    if not s.has_progression:
        raise ConfigError("sharpness quantities need a progression variant")
    if not (s.start_level < l <= N <= s.levels) or (strict and l == N):
        raise ConfigError(f"need N0 < l < N <= levels, got l={l}, N={N}, N0={s.start_level}")
    if r < 1:
        raise ConfigError("r must be a positive integer")


def sumset_bound(s: BranchingSchedule, l: int, N: int, r: int) -> int:
    """r^(l+1) tau_1..tau_l Psi(N)/Psi(l): digit-counting bound on #(r-fold sums of F_l cap A_N)."""
    _check_levels(s, l, N, r, strict=False)
    return r ** (l + 1) * s.tau_product(l) * (s.Psi[N] // s.Psi[l])


def restricted_count(s: BranchingSchedule, l: int, N: int) -> int:
    """#(F_l cap A_N) = tau_1..tau_l t_{l+1}..t_N."""
    return s.tau_product(l) * (s.T[N] // s.T[l])


def energy_lower_bound(s: BranchingSchedule, l: int, N: int, r: int) -> Fraction:
    """||g||_1^2 / #Z bound, i.e. the Cauchy-Schwarz lower bound for M_{l,N,r}."""
    return Fraction(restricted_count(s, l, N) ** (2 * r), sumset_bound(s, l, N, r))


def norm_below(s: BranchingSchedule, l: int, r: int) -> Fraction:
    """C_r Psi(l) (tau_1..tau_l)^(2r-1) / (r^(l+1) T_l^(2r)), with C_r = B_{2r}(0)."""
    if not s.has_progression or not s.start_level < l <= s.levels:
        raise ConfigError(f"need a progression variant and N0 < l <= levels (l={l})")
    tp = s.tau_product(l)
    return bspline_central(2 * r, 0) * Fraction(s.Psi[l] * tp ** (2 * r - 1), r ** (l + 1) * s.T[l] ** (2 * r))


# ---------------------------------------------------------------- norms


def salem_norm_exact(tree: CantorTree, l: int, N: int, r: int) -> Fraction:
    """||(f_l mu_N)^||_{2r}^{2r} as an exact rational."""
    s = tree.schedule
    _check_levels(s, l, N, r)
    if N > tree.depth:
        raise ConfigError(f"level {N} not built (depth {tree.depth})")
    inst = EnergyInstance.from_tree(tree, l, N, r)
    corr = signed_sum_counts(inst, r - 1)
    weighted = sum(corr[m] * bspline_central(2 * r, m) for m in range(-(r - 1), r))
    return Fraction(s.Psi[N], s.T[N] ** (2 * r)) * weighted


def salem_lower_chain(tree: CantorTree, l: int, N: int, r: int) -> Fraction:
    """Psi(N) T_N^{-2r} M_{l,N,r} B_{2r}(0): the m = 0 term alone."""
    s = tree.schedule
    M = energy_via_convolution(EnergyInstance.from_tree(tree, l, N, r))
    return Fraction(s.Psi[N], s.T[N] ** (2 * r)) * M * bspline_central(2 * r, 0)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    tail_bound: float
    samples_per_unit: int
    decay_constant: float


def _sinc_power_window(u: np.ndarray, J: int, q: float) -> np.ndarray:
    """sum_{j=-J}^{J-1} |sinc(u + j)|^q for u in [0, 1)."""
    w = np.zeros_like(u)
    for j in range(-J, J):
        w += np.abs(box_kernel(u + j)) ** q
    return w


def salem_norm_quadrature(
    tree: CantorTree, l: int, N: int, q: float, Xi: float, rtol: float = 1e-6, max_samples: int = 1 << 26
) -> QuadratureResult:
    """Trapezoid value of the integral of |(f_l mu_N)^|^q over |xi| <= Xi, plus a tail bound.

    With u = xi/Psi(N) the integrand factors as T_N^{-q} |S(u)|^q |sinc u|^q with
    S 1-periodic, so the window [-J, J) (J = Xi/Psi(N), rounded up) folds onto
    [0, 1).  |S| on an M-point grid comes from one length-M transform of the
    point set reduced mod M; M doubles until the value moves by less than rtol.

    The tail uses |(f_l mu_N)^(xi)| <= massF Psi(N) / (pi |xi|), valid for every
    step measure; qbeta/2 <= 1 is refused because the decay certificate could
    not make the tail of the limit measure integrable.
    """
    s = tree.schedule
    if q < 2:
        raise ConfigError("q must be at least 2")
    if Xi <= 2:
        raise ConfigError("Xi must exceed 2")
    if q * s.beta / 2 <= 1:
        raise TailDivergentError(f"q beta / 2 = {q * s.beta / 2:.4g} <= 1: tail not integrable by the decay certificate")
    pts = restricted_nodes(tree, l, N)
    Psi, T = s.Psi[N], s.T[N]
    J = max(1, math.ceil(Xi / Psi))
    span = int(pts[-1] - pts[0]) + 1
    M = 1 << max(4, (2 * span).bit_length())
    prev = None
    shifted = pts - pts[0]
    while True:
        hist = np.bincount(shifted % M, minlength=M).astype(np.float64)
        S = np.abs(scipy.fft.fft(hist, workers=tree.workers))
        u = np.arange(M) / M
        val = Psi * float(np.sum((S / T) ** q * _sinc_power_window(u, J, q))) / M
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            break
        if 2 * M > max_samples:
            raise ConfigError("quadrature did not converge within the sample cap")
        prev, M = val, 2 * M
    mass = len(pts) / T
    Xi_eff = J * Psi
    tail = 2 * (mass * Psi / math.pi) ** q * Xi_eff ** (1 - q) / (q - 1)
    # measured decay constant of the restricted measure against |k|^(-beta/2), reported only
    ks = np.arange(1, min(Psi, 1 << 16))
    Sk = scipy.fft.fft(np.bincount(pts, minlength=Psi).astype(np.float64), workers=tree.workers)[ks]
    coeff = np.abs(Sk * box_kernel(ks / Psi)) / T
    c_dec = float((coeff * ks ** (s.beta / 2)).max())
    return QuadratureResult(val, tail, M, c_dec)


# -------------------------------------------------------------- certificate


@dataclass(frozen=True)
class SharpnessCertificate:
    l: int
    r: int
    q: float
    N: int
    sumset_bound: int
    energy_lower: Fraction
    norm2r_lower: Fraction
    quotient_lower: float
    mass_f: Fraction
    growth_exponent: float

    @property
    def blows_up(self) -> bool:
        return self.growth_exponent > 0

    def log_quotient(self) -> float:
        return math.log(self.quotient_lower)

    def compensated(self, s: BranchingSchedule) -> float:
        """log quotient - (e(q)/q) log Psi(l) + ((l+1)/q) log r."""
        return (
            self.log_quotient()
            - self.growth_exponent / self.q * math.log(s.Psi[self.l])
            + (self.l + 1) / self.q * math.log(self.r)
        )

    def row(self) -> dict:
        return {
            "l": self.l,
            "q": self.q,
            "r": self.r,
            "massF": str(self.mass_f),
            "energyLower": str(self.energy_lower),
            "norm2rLower": str(self.norm2r_lower),
            "quotientLower": self.quotient_lower,
            "e(q)": self.growth_exponent,
        }


def _log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def quotient_certificate(tree_or_schedule, l: int, q: float, r: int, N: int | None = None) -> SharpnessCertificate:
    """Assemble the lower bound for ||(f_l mu)^||_q / ||f_l||_{L^2(mu)} from schedule data alone."""
    s = tree_or_schedule.schedule if isinstance(tree_or_schedule, CantorTree) else tree_or_schedule
    if not s.has_progression:
        raise ConfigError("sharpness certificate needs a progression variant")
    if not q >= 2:
        raise ConfigError(f"need q >= 2, got {q}")
    if not q < 2 * r:
        raise ConfigError(f"need q < 2r, got q={q}, r={r}")
    if not r * s.beta > 1:
        raise ConfigError(f"need r > 1/beta, got r={r}, beta={s.beta}")
    q0 = q_critical(s.alpha, s.beta)
    if not 2 * r > q0:
        raise ConfigError(f"need 2r > q0 = {q0:.6g}, got r={r}")
    if N is None:
        N = l
    _check_levels(s, l, N, r, strict=False)
    tp, T = s.tau_product(l), s.T[l]
    C_r = bspline_central(2 * r, 0)
    mass = Fraction(tp, T)
    log_q = (
        _log_fraction(C_r)
        + math.log(s.Psi[l])
        + (q - 1) * math.log(tp)
        - (l + 1) * math.log(r)
        - q * math.log(T)
    ) / q - 0.5 * _log_fraction(mass)
    return SharpnessCertificate(
        l=l,
        r=r,
        q=q,
        N=N,
        sumset_bound=sumset_bound(s, l, N, r),
        energy_lower=energy_lower_bound(s, l, N, r),
        norm2r_lower=norm_below(s, l, r),
        quotient_lower=math.exp(log_q),
        mass_f=mass,
        growth_exponent=growth_exponent(s.alpha, s.beta, q),
    )


def sharpness_sweep(s: BranchingSchedule, q: float, r: int, l_max: int | None = None) -> list[SharpnessCertificate]:
    l_max = s.levels if l_max is None else l_max
    return [quotient_certificate(s, l, q, r) for l in range(s.start_level + 1, l_max + 1)]


def write_certificates_csv(certs, path) -> None:
    rows = [c.row() for c in certs]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["l"])
        w.writeheader()
        w.writerows(rows)
