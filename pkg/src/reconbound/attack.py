"""Informed-adversary reconstruction of a single training sample from a
released generalized-linear-model parameter vector.

The adversary knows every training sample except the challenge, plus the
challenge label.  When the learner trains to an exact L2-regularized
optimum, the per-sample gradients and N*lam*theta sum to zero, so the
challenge's gradient contribution can be read off the release:

    g = -N * lam * h - sum of known-sample gradients at h.

For logistic loss that contribution is collinear with the challenge
features, g = c * x with c = -y * sigmoid(-y * h.x), leaving a single
scalar unknown u = h.x pinned by the equation u * c(u) = h.g.  The
reconstruction is g / c.

The scalar equation can have two solutions when the challenge is
classified correctly; the root of smaller magnitude is returned, which
is provably the true one whenever |h.x| < 1.543 (guaranteed for
||h|| below that, e.g. whenever lam >= 0.65 on unit-norm rows).  Noisy
releases can make the equation unsolvable; that surfaces as
`NoRootError` and averaging simply drops the draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .mechanisms import MechanismOutput, logistic_grad_sum, sigmoid

_ROOT_SCAN_POINTS = 4001


class NoRootError(RuntimeError):
    """The release is inconsistent with every candidate challenge."""


class DegenerateGradientError(RuntimeError):
    """The recovered gradient contribution is numerically zero."""


class AllFailedError(RuntimeError):
    """Every drawn release failed to invert."""


class BudgetError(ValueError):
    """Shadow targets would exhaust the query budget."""


@dataclass(frozen=True)
class ThreatModel:
    """Adversary knowledge: the fixed dataset, the challenge label and
    ground-truth features (held for scoring only), and the query budget
    m split into k shadow trainings and n = m - k output samples."""

    features_minus: np.ndarray
    labels_minus: np.ndarray
    challenge_x: np.ndarray
    challenge_y: float
    query_budget_m: int
    shadow_count_k: int = 0

    def __post_init__(self):
        x = np.array(self.features_minus, dtype=float)
        y = np.array(self.labels_minus, dtype=float)
        cx = np.array(self.challenge_x, dtype=float)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise ValueError("features_minus must be (N-1, d) with matching labels")
        if cx.shape != (x.shape[1],):
            raise ValueError("challenge_x must match the feature dimension")
        if self.challenge_y not in (-1.0, 1.0):
            raise ValueError("challenge_y must be -1 or +1")
        if self.shadow_count_k < 0:
            raise ValueError("shadow_count_k must be nonnegative")
        if self.shadow_count_k >= self.query_budget_m:
            raise BudgetError(f"k={self.shadow_count_k} leaves no sampling budget "
                              f"out of m={self.query_budget_m}")
        if x.size and bool(np.any(np.all(x == cx[None, :], axis=1))):
            raise ValueError("challenge must not appear in the fixed dataset")
        for arr, name in ((x, "features_minus"), (y, "labels_minus"), (cx, "challenge_x")):
            arr.setflags(write=False)
        object.__setattr__(self, "features_minus", x)
        object.__setattr__(self, "labels_minus", y)
        object.__setattr__(self, "challenge_x", cx)

    @property
    def sample_count_n(self) -> int:
        return self.query_budget_m - self.shadow_count_k

    @property
    def n_total(self) -> int:
        """Training-set size including the challenge."""
        return self.features_minus.shape[0] + 1


@dataclass(frozen=True)
class AttackResult:
    z_hat: np.ndarray
    mse: float
    per_sample_estimates: tuple
    failures: int = 0


def _r(w):
    """w * sigmoid(w); the scalar consistency function."""
    return w * sigmoid(w)


def _solve_scalar(target: float, bracket: float, tol: float) -> float:
    """All roots of w*sigmoid(w) = target on [-bracket, bracket], returned
    as the one of smallest magnitude.  Scan for sign changes, then bisect."""
    grid = np.linspace(-bracket, bracket, _ROOT_SCAN_POINTS)
    vals = _r(grid) - target
    roots = []
    exact = np.flatnonzero(vals == 0.0)
    roots.extend(float(grid[i]) for i in exact)
    sign_change = np.flatnonzero(vals[:-1] * vals[1:] < 0.0)
    for i in sign_change:
        lo, hi = float(grid[i]), float(grid[i + 1])
        flo = _r(lo) - target
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            fmid = _r(mid) - target
            if fmid == 0.0:
                lo = hi = mid
                break
            if (flo < 0) != (fmid < 0):
                hi = mid
            else:
                lo, flo = mid, fmid
        roots.append(0.5 * (lo + hi))
    if not roots:
        raise NoRootError(f"no sign change for target {target:.6g} on [-{bracket}, {bracket}]")
    return min(roots, key=abs)


def glm_reconstruct_single(h, features_minus: np.ndarray, labels_minus: np.ndarray,
                           y_star: float, lam: float, n_total: int,
                           bracket: float = 50.0, tol: float = 1e-12) -> np.ndarray:
    """Invert one released parameter vector into challenge features.

    ``h`` may be a raw vector or a `MechanismOutput`.  ``n_total`` is the
    training-set size including the challenge.
    """
    if isinstance(h, MechanismOutput):
        h = h.value
    h = np.asarray(h, dtype=float)
    g = -n_total * lam * h - logistic_grad_sum(h, features_minus, labels_minus)
    gnorm = math.sqrt(float(g @ g))
    if gnorm < 1e-12:
        raise DegenerateGradientError("challenge gradient contribution is numerically zero")
    # u = h.x solves u * (-y * sigmoid(-y*u)) = h.g;  substituting w = -y*u
    # turns the left side into w * sigmoid(w) for either label.
    target = float(h @ g)
    w = _solve_scalar(target, bracket, tol)
    c = float(-y_star * sigmoid(np.array(w)))
    return g / c


def attack_average(model: ThreatModel, mechanism: Callable[[np.random.Generator], object],
                   lam: float, rng: np.random.Generator,
                   metric: Callable[[np.ndarray, np.ndarray], float] | None = None) -> AttackResult:
    """Draw n releases, invert each, and average the survivors.

    ``mechanism(rng)`` must return one release (vector or
    `MechanismOutput`) per call.  Draws whose scalar equation has no
    solution are dropped and counted; the error is the squared metric
    distance between the challenge and the averaged estimate.
    """
    estimates = []
    failures = 0
    for _ in range(model.sample_count_n):
        release = mechanism(rng)
        try:
            x_hat = glm_reconstruct_single(release, model.features_minus,
                                           model.labels_minus, model.challenge_y,
                                           lam, model.n_total)
        except (NoRootError, DegenerateGradientError):
            failures += 1
            continue
        estimates.append(x_hat)
    if not estimates:
        raise AllFailedError(f"all {model.sample_count_n} draws failed to invert")
    z_hat = np.mean(np.stack(estimates), axis=0)
    if metric is None:
        diff = model.challenge_x - z_hat
        dist = math.sqrt(float(diff @ diff))
    else:
        dist = metric(model.challenge_x, z_hat)
    return AttackResult(z_hat=z_hat, mse=dist * dist,
                        per_sample_estimates=tuple(estimates), failures=failures)


def shadow_pairs(model: ThreatModel, shadow_targets: Sequence,
                 trainer: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> list:
    """Train one model per shadow target on the fixed dataset plus that
    target, yielding (released model, target) pairs for learned attacks.

    The closed-form inversion above never consumes these; the interface
    exists so trainable attack models can plug into the same budget
    accounting (k trainings leave n = m - k sampling draws).
    """
    if len(shadow_targets) != model.shadow_count_k:
        raise BudgetError(f"got {len(shadow_targets)} shadow targets, "
                          f"budgeted for {model.shadow_count_k}")
    pairs = []
    for x_tilde, y_tilde in shadow_targets:
        feats = np.vstack([model.features_minus, np.asarray(x_tilde, dtype=float)])
        labels = np.append(model.labels_minus, float(y_tilde))
        pairs.append((trainer(feats, labels), (np.asarray(x_tilde, dtype=float), float(y_tilde))))
    return pairs
