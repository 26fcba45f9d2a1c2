"""Digit-selection rules shared by the schedule (start-level simulation) and the tree."""

from __future__ import annotations


def seed_digits(psi: int, t: int, tau: int, left: bool, right: bool, in_progression: bool) -> list[int]:
    """Deterministic child digits for a parent at a seed level.

    ``left``/``right`` flag a parent whose cell touches 0 (resp. 1); the rule
    keeps a margin there whenever the digit count allows it.  Progression
    parents always get ``{1..tau}`` plus the smallest digits above ``tau + 1``.
    """
    if in_progression:
        if t > psi - 2:
            raise ValueError(f"isolation infeasible: t={t} > psi-2={psi - 2}")
        extra = list(range(tau + 2, tau + 2 + (t - tau)))
        return list(range(1, tau + 1)) + extra
    lo = 1 if left else 0
    hi = psi - 2 if right else psi - 1
    if hi - lo + 1 >= t:
        return list(range(lo, lo + t))
    if left and t <= psi - 1:
        return list(range(1, t + 1))
    return list(range(t))


def isolate_progression(base, psi: int, t: int, tau: int) -> list[int]:
    """Adjoin ``{1..tau}`` to ``base`` and keep ``0`` and ``tau + 1`` out.

    Largest unprotected digits are evicted first; vacated slots are refilled
    with the largest free digits above ``tau + 1``.
    """
    protected = set(range(1, tau + 1))
    digits = set(base) | protected
    for d in sorted(digits - protected, reverse=True):
        if len(digits) <= t:
            break
        digits.discard(d)
    digits.discard(0)
    digits.discard(tau + 1)
    for d in range(psi - 1, tau + 1, -1):
        if len(digits) >= t:
            break
        digits.add(d)
    if len(digits) != t:
        raise ValueError(f"isolation infeasible: psi={psi}, t={t}, tau={tau}")
    return sorted(digits)
