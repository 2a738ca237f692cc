"""Lower bounds on the reconstruction error achievable by any adversary
that draws n samples from a private learner's output distribution.

All bounds are exact closed forms with their proof constants pinned
(two-point reduction constant 1/16; the Fano bound keeps the maximized
form of its quadratic rather than a loose Omega).  The constants are
overridable through `BoundQuery` so audits can tighten or loosen them
deliberately, never silently.

Division-by-zero privacy levels yield +inf, meaning perfect privacy
forbids consistent reconstruction; CSV emitters translate that into an
explicit INFINITE flag instead of serializing bare infinities without
context.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .mechanisms import PrivacyParams

LECAM_CONSTANT = 1.0 / 16.0


class DegenerateDimensionError(ValueError):
    """Effective dimension too small for the multi-hypothesis bound."""


class Validity(enum.Enum):
    VALID = "VALID"
    VACUOUS = "VACUOUS"
    INFINITE = "INFINITE"


@dataclass(frozen=True)
class BoundQuery:
    """Everything a bound evaluation can consume.

    ``n`` counts the adversary's samples from the output distribution,
    not the training-set size.  ``d_eff`` is the log covering number of
    the domain's unit ball (see `metric_space.effective_dimension`).
    """

    params: PrivacyParams
    n: int = 1
    diam: float = math.nan
    coord_diam_sq_sum: float = math.nan
    d_eff: float = math.nan
    c_lecam: float = LECAM_CONSTANT

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.c_lecam <= 0:
            raise ValueError("c_lecam must be positive")


def dp_lecam_bound(q: BoundQuery) -> float:
    """Two-point bound for (eps, delta)-DP learners:
    C * diam^2 * exp(-n * eps * tanh(eps/2)) * (1 - delta)."""
    if not math.isfinite(q.diam) or q.diam < 0:
        raise ValueError("diam must be finite and nonnegative")
    eps = q.params.eps
    return (q.c_lecam * q.diam ** 2
            * math.exp(-q.n * eps * math.tanh(eps / 2.0))
            * (1.0 - q.params.delta))


def renyi_dp_lecam_bound(q: BoundQuery) -> float:
    """Two-point bound for order-alpha Renyi DP:
    C * diam^2 * exp(-n * min(eps, 3*alpha*eps^2/2))."""
    if q.params.alpha is None:
        raise ValueError("alpha is required for the Renyi variant")
    if not math.isfinite(q.diam) or q.diam < 0:
        raise ValueError("diam must be finite and nonnegative")
    eps = q.params.eps
    exponent = min(eps, 1.5 * q.params.alpha * eps * eps)
    return q.c_lecam * q.diam ** 2 * math.exp(-q.n * exponent)


def mdp_lecam_bound(q: BoundQuery) -> float:
    """Two-point bound for (eps_metric, delta) metric-private learners:
    (1 - delta) / (2 * n * e * eps_metric^2).  Infinite at eps_metric=0."""
    e_l = q.params.eps_metric
    if e_l == 0:
        return math.inf
    return (1.0 - q.params.delta) / (2.0 * q.n * math.e * e_l * e_l)


def mdp_fano_bound(q: BoundQuery) -> float:
    """Multi-hypothesis bound for metric privacy in the high-dimensional
    regime, in its maximized closed form
    (d_eff - ln2)^2 / (8 * n * eps_metric^2 * d_eff) * (1 - delta).

    Requires d_eff > ln 2 (at least two distinguishable hypotheses).
    """
    d_eff = q.d_eff
    if not d_eff > math.log(2.0):
        raise DegenerateDimensionError(f"d_eff={d_eff} must exceed ln 2")
    e_l = q.params.eps_metric
    if e_l == 0:
        return math.inf
    num = (d_eff - math.log(2.0)) ** 2
    return num / (8.0 * q.n * e_l * e_l * d_eff) * (1.0 - q.params.delta)


def unbiased_rdp_bound(q: BoundQuery) -> float:
    """Restated prior bound for unbiased attacks on order-2 Renyi-DP
    learners: sum_i diam_i^2 / (4 * (e^eps - 1)).  Infinite at eps=0."""
    if not q.coord_diam_sq_sum >= 0:
        raise ValueError("coord_diam_sq_sum must be nonnegative")
    eps = q.params.eps
    if eps == 0:
        return math.inf
    return q.coord_diam_sq_sum / (4.0 * (math.exp(eps) - 1.0))


def unbiased_rdp_validity_threshold(d: int) -> float:
    """Privacy level below which `unbiased_rdp_bound` exceeds the trivial
    upper bound on the unit-ball construction: ln(1 + d/4)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return math.log(1.0 + d / 4.0)


def validity_check(bound_value: float, trivial_upper: float) -> Validity:
    """Compare a bound against the trivial upper bound diam^2 on any
    reconstruction error; bounds exceeding it are vacuous."""
    if trivial_upper < 0:
        raise ValueError("trivial_upper must be nonnegative")
    if math.isinf(bound_value):
        return Validity.INFINITE
    return Validity.VACUOUS if bound_value > trivial_upper else Validity.VALID
