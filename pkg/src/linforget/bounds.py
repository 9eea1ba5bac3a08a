"""Closed-form high-probability risk bounds and per-trial satisfaction checks.

Each bound is a deterministic function of (d, n, p, gamma, |theta|^2).  The
constants are universal and loose by design; the bounds are only claimed on
the premise n >= d, p >= 20 n, gamma >= 1/sqrt(n d), so satisfaction flags
are reported as not-applicable outside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def bound_single(d: int, n: int, p: int, theta_sq: float) -> float:
    """Risk bound for the estimator trained on a single task:
    (72 sqrt(d/n) + 18 n/p) * |theta|^2."""
    return (72.0 * math.sqrt(d / n) + 18.0 * n / p) * theta_sq


def bound_terminal(d: int, n: int, p: int, theta_sq: float) -> float:
    """First-task risk bound after also fitting the rotated task:
    (72 sqrt(d/n) + 96 sqrt(n/p)) * |theta|^2."""
    return (72.0 * math.sqrt(d / n) + 96.0 * math.sqrt(n / p)) * theta_sq


def bound_forgetting(n: int, p: int, gamma: float, theta_sq: float) -> float:
    """Bound on the first-task risk increase caused by the second fit:
    (66 sqrt(n/p) + 12/(p gamma)) * |theta|^2."""
    return (66.0 * math.sqrt(n / p) + 12.0 / (p * gamma)) * theta_sq


def bound_ratio(d: int, n: int, p: int) -> float | None:
    """Bound on forgetting relative to initial learning:
    78 sqrt(n/p) / (1 - 72 sqrt(d/n) - 18 n/p).

    None when the denominator is not positive; the ratio bound is vacuous
    there and callers count such trials instead of averaging them.
    """
    denom = 1.0 - 72.0 * math.sqrt(d / n) - 18.0 * n / p
    if denom <= 0.0:
        return None
    return 78.0 * math.sqrt(n / p) / denom


def bound_projection(d: int, n: int) -> float:
    """Bound on the squared out-of-rowspace energy of the unit target
    direction: 18 sqrt(d/n)."""
    return 18.0 * math.sqrt(d / n)


def premise_holds(d: int, n: int, p: int, gamma: float) -> bool:
    """Strictest intersection of the bound premises:
    n >= d, p >= 20 n, gamma >= 1/sqrt(n d)."""
    return n >= d and p >= 20 * n and gamma >= 1.0 / math.sqrt(n * d)


def forgetting_premise_holds(d: int, n: int, p: int, gamma: float) -> bool:
    """The forgetting bound's own premise: n >= d and p >= max(17 n, 1/gamma)."""
    return n >= d and p >= max(17 * n, 1.0 / gamma)


@dataclass(frozen=True)
class BoundSheet:
    """All bound values for one (d, n, p, gamma, |theta|^2) tuple.

    premise_ok gates combined checks; the forgetting bound's slightly weaker
    premise is recorded separately so nothing is claimed outside its own
    hypotheses.
    """

    premise_ok: bool
    forgetting_premise_ok: bool
    b_single: float
    b_terminal: float
    b_forgetting: float
    b_ratio: float | None
    b_proj: float
    theta_sq: float

    @classmethod
    def evaluate(cls, d: int, n: int, p: int, gamma: float, theta_sq: float) -> "BoundSheet":
        return cls(
            premise_ok=premise_holds(d, n, p, gamma),
            forgetting_premise_ok=forgetting_premise_holds(d, n, p, gamma),
            b_single=bound_single(d, n, p, theta_sq),
            b_terminal=bound_terminal(d, n, p, theta_sq),
            b_forgetting=bound_forgetting(n, p, gamma, theta_sq),
            b_ratio=bound_ratio(d, n, p),
            b_proj=bound_projection(d, n),
            theta_sq=theta_sq,
        )


@dataclass(frozen=True)
class TrialChecks:
    """Per-bound satisfaction flags for one trial; None means not applicable
    (premise violated, or the bound/realized value is undefined)."""

    single: bool | None
    terminal: bool | None
    forgetting: bool | None
    ratio: bool | None
    projection: bool | None


def check_trial(sheet: BoundSheet, *, r_a: float, r_ba: float, forgetting: float,
                ratio: float | None, proj_energy: float) -> TrialChecks:
    """Compare one trial's realized quantities against the bound sheet."""
    if not sheet.premise_ok:
        return TrialChecks(None, None, None, None, None)
    ratio_ok = None
    if sheet.b_ratio is not None and ratio is not None:
        ratio_ok = bool(ratio <= sheet.b_ratio)
    return TrialChecks(
        single=bool(r_a <= sheet.b_single),
        terminal=bool(r_ba <= sheet.b_terminal),
        forgetting=bool(forgetting <= sheet.b_forgetting),
        ratio=ratio_ok,
        projection=bool(proj_energy <= sheet.b_proj),
    )
