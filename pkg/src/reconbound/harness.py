"""Experiment orchestration: datasets, epsilon sweeps, aggregation, and
CSV/SVG emission.

A sweep trains a private learner, releases it at each epsilon on the
grid, runs the reconstruction attack per trial, and compares the mean
attack error against every applicable theoretical lower bound on the
same grid.  Everything is deterministic given (config, seed): per-trial
generators are derived from the master seed by counter-based spawn keys,
so neither trial order nor worker count can perturb results.

Draws whose inversion has no solution are dropped and counted; a grid
cell where every trial failed reports an infinite mean error, meaning
the attack produced no evidence against any bound at that privacy level.
"""

from __future__ import annotations

import concurrent.futures
import io
import math
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import bounds as bounds_mod
from . import pnsgd as pnsgd_mod
from .attack import AllFailedError, ThreatModel, attack_average
from .bounds import BoundQuery
from .mechanisms import (LogRegProblem, PrivacyParams, output_perturb_dp,
                         output_perturb_mdp_euclidean, sigmoid,
                         train_logreg_exact)
from .metric_space import NormedSpaceSpec, effective_dimension

MECHANISM_KINDS = ("OUTPUT_PERTURB_DP", "OUTPUT_PERTURB_MDP", "PNSGD_DP", "PNSGD_MDP")
DATASET_SOURCES = ("SYNTHETIC", "IDX_FILES")

_IMAGES_MAGIC = 0x00000803
_LABELS_MAGIC = 0x00000801

# bounds the audit enforces; the unbiased prior bound is emitted for
# plotting but assumes an unbiased attack, which this one is not
AUDITED_BOUNDS = ("dp_lecam", "mdp_lecam", "mdp_fano")


class ConfigError(ValueError):
    """Bad sweep configuration (file or field level)."""


class DominanceError(RuntimeError):
    """The empirical attack error dipped below an applicable lower bound."""


class IdxFormatError(ValueError):
    """IDX file violates the magic/shape/length contract."""


class DigitAbsentError(ValueError):
    """A requested digit does not occur in the label file."""


@dataclass(frozen=True)
class SweepConfig:
    eps_grid: tuple
    mechanism_kind: str
    seed: int
    trials: int = 50
    dataset_source: str = "SYNTHETIC"
    n_samples: int = 1
    lam: float = 1e-2
    delta: float = 1e-5
    alpha: float = 2.0
    train_size: int = 2000
    dim: int = 16
    noiseless: bool = False
    idx_images: str = ""
    idx_labels: str = ""
    digit_pair: tuple = (0, 1)
    constraint_radius: float = 10.0
    workers: int = 1

    def __post_init__(self):
        grid = tuple(float(e) for e in self.eps_grid)
        if not grid:
            raise ConfigError("eps_grid must be nonempty")
        if any(e <= 0 for e in grid):
            raise ConfigError("eps grid values must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("eps_grid must be strictly increasing")
        object.__setattr__(self, "eps_grid", grid)
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.mechanism_kind not in MECHANISM_KINDS:
            raise ConfigError(f"unknown mechanism_kind {self.mechanism_kind!r}")
        if self.dataset_source not in DATASET_SOURCES:
            raise ConfigError(f"unknown dataset_source {self.dataset_source!r}")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "digit_pair", tuple(int(d) for d in self.digit_pair))


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    mechanism: str
    mean_mse: float
    ci_low: float
    ci_high: float
    bound_values: dict
    failures: int


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    bound_names: tuple
    rows: tuple


def parse_eps_grid(text: str) -> tuple:
    """Grid from 'a:b:step' (half-open at b) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad grid spec {text!r}, expected a:b:step")
        a, b, step = (float(p) for p in parts)
        if step <= 0 or b <= a:
            raise ConfigError(f"bad grid spec {text!r}")
        out = []
        k = 0
        while True:
            v = a + k * step
            if v >= b - 1e-12:
                break
            out.append(v)
            k += 1
        return tuple(out)
    return tuple(float(p) for p in text.split(","))


_CONFIG_PARSERS = {
    "eps_grid": parse_eps_grid,
    "trials": int,
    "mechanism_kind": str,
    "seed": int,
    "dataset_source": str,
    "n_samples": int,
    "lam": float,
    "delta": float,
    "alpha": float,
    "train_size": int,
    "dim": int,
    "noiseless": lambda s: s.strip().lower() in ("1", "true", "yes"),
    "idx_images": str,
    "idx_labels": str,
    "digit_pair": lambda s: tuple(int(x) for x in s.split(",")),
    "constraint_radius": float,
    "workers": int,
}


def parse_config_text(text: str) -> SweepConfig:
    """Flat key = value lines; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](val.strip())
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    missing = {"eps_grid", "mechanism_kind", "seed"} - values.keys()
    if missing:
        raise ConfigError(f"missing required keys: {sorted(missing)}")
    return SweepConfig(**values)


def parse_config(path) -> SweepConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def generate_synthetic(n: int, d: int, seed: int, lam: float = 1e-2,
                       tolerance: float = 1e-10) -> LogRegProblem:
    """Two Gaussian blobs at +-0.5 * unit direction with isotropic spread
    0.3, labels -1/+1, rows rescaled into the unit L2 ball."""
    if d < 1 or n < 1:
        raise ValueError("need n >= 1 and d >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    mu = rng.normal(size=d)
    mu /= math.sqrt(float(mu @ mu))
    labels = rng.choice(np.array([-1.0, 1.0]), size=n)
    x = labels[:, None] * (0.5 * mu)[None, :] + 0.3 * rng.normal(size=(n, d))
    norms = np.sqrt(np.sum(x * x, axis=1))
    x /= np.maximum(norms, 1.0)[:, None]
    return LogRegProblem(features=x, labels=labels, lam=lam, tolerance=tolerance)


def _read_idx(raw: bytes, magic_expected: int, path: str) -> tuple:
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: truncated header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != magic_expected:
        raise IdxFormatError(f"{path}: magic 0x{magic:08x} != 0x{magic_expected:08x}")
    return magic, count


def load_idx(images_path, labels_path, digits: tuple = (0, 1), lam: float = 1e-2,
             tolerance: float = 1e-10) -> LogRegProblem:
    """Load a big-endian IDX image/label pair, filter to two digits, map
    labels to -1/+1, scale pixels to [0,1], and normalize rows to the
    unit L2 ball."""
    with open(images_path, "rb") as fh:
        img_raw = fh.read()
    with open(labels_path, "rb") as fh:
        lab_raw = fh.read()
    _, n_img = _read_idx(img_raw, _IMAGES_MAGIC, str(images_path))
    if len(img_raw) < 16:
        raise IdxFormatError(f"{images_path}: truncated dimension header")
    rows, cols = struct.unpack(">II", img_raw[8:16])
    need = 16 + n_img * rows * cols
    if len(img_raw) < need:
        raise IdxFormatError(f"{images_path}: expected {need} bytes, found {len(img_raw)}")
    _, n_lab = _read_idx(lab_raw, _LABELS_MAGIC, str(labels_path))
    if len(lab_raw) < 8 + n_lab:
        raise IdxFormatError(f"{labels_path}: expected {8 + n_lab} bytes, found {len(lab_raw)}")
    if n_img != n_lab:
        raise IdxFormatError(f"image count {n_img} != label count {n_lab}")
    images = np.frombuffer(img_raw, dtype=np.uint8, count=n_img * rows * cols,
                           offset=16).reshape(n_img, rows * cols)
    labels = np.frombuffer(lab_raw, dtype=np.uint8, count=n_lab, offset=8)
    lo, hi = digits
    mask_lo = labels == lo
    mask_hi = labels == hi
    if not mask_lo.any():
        raise DigitAbsentError(f"digit {lo} absent from {labels_path}")
    if not mask_hi.any():
        raise DigitAbsentError(f"digit {hi} absent from {labels_path}")
    keep = mask_lo | mask_hi
    x = images[keep].astype(float) / 255.0
    y = np.where(labels[keep] == hi, 1.0, -1.0)
    norms = np.sqrt(np.sum(x * x, axis=1))
    x /= np.maximum(norms, 1.0)[:, None]
    return LogRegProblem(features=x, labels=y, lam=lam, tolerance=tolerance)


def _load_problem(config: SweepConfig) -> LogRegProblem:
    if config.dataset_source == "SYNTHETIC":
        return generate_synthetic(config.train_size, config.dim, config.seed,
                                  lam=config.lam)
    return load_idx(config.idx_images, config.idx_labels,
                    digits=config.digit_pair, lam=config.lam)


def _logreg_sample_grad(lam: float) -> Callable:
    def grad(w, sample):
        x, y = sample
        return -y * float(sigmoid(np.array(-y * float(w @ x)))) * x + lam * w
    return grad


def _pnsgd_release(config: SweepConfig, problem: LogRegProblem, eps: float,
                   metric: bool) -> Callable:
    radius = config.constraint_radius
    beta = 0.25 + config.lam
    if config.noiseless:
        sigma = 0.0
    elif metric:
        l_input = 1.0 + radius / 4.0
        sigma_sq = pnsgd_mod.noise_for_renyi_mdp(config.alpha, eps, l_input,
                                                 domain_diam=2.0,
                                                 n=problem.n, t=problem.n)
        sigma = math.sqrt(sigma_sq)
    else:
        g_bound = 1.0 + config.lam * radius
        sigma_sq, _ = pnsgd_mod.noise_for_target_dp(eps, config.delta, g_bound,
                                                    n=problem.n, t=problem.n)
        sigma = math.sqrt(sigma_sq)
    run_cfg = pnsgd_mod.PNSGDConfig(eta=1.0 / beta, sigma=sigma,
                                    w0=np.zeros(problem.dim),
                                    constraint_radius=radius, beta=beta)
    samples = [(problem.features[i], problem.labels[i]) for i in range(problem.n)]
    grad = _logreg_sample_grad(config.lam)

    def release(rng):
        return pnsgd_mod.pnsgd_run(run_cfg, samples, grad, rng)

    return release


def _make_release_fn(config: SweepConfig, problem: LogRegProblem, eps: float,
                     theta_hat: np.ndarray | None) -> Callable:
    kind = config.mechanism_kind
    if kind == "OUTPUT_PERTURB_DP":
        params = PrivacyParams(eps=eps)
        return lambda rng: output_perturb_dp(theta_hat, params, problem.n,
                                             config.lam, rng,
                                             noiseless=config.noiseless)
    if kind == "OUTPUT_PERTURB_MDP":
        params = PrivacyParams(eps_metric=eps)
        return lambda rng: output_perturb_mdp_euclidean(theta_hat, params, problem.n,
                                                        config.lam, rng,
                                                        noiseless=config.noiseless)
    if kind == "PNSGD_DP":
        return _pnsgd_release(config, problem, eps, metric=False)
    return _pnsgd_release(config, problem, eps, metric=True)


def _bound_names(kind: str) -> tuple:
    if kind.endswith("_DP"):
        return ("dp_lecam", "rdp_unbiased")
    return ("mdp_lecam", "mdp_fano")


def evaluate_bounds(config: SweepConfig, problem: LogRegProblem, eps: float) -> dict:
    """All bounds applicable to this mechanism kind at one grid point.

    The data domain is the unit L2 ball after row normalization, so
    diam = 2, effective dimension d*ln2, and the prior unbiased bound
    uses its unit-ball convention (coordinate sum d, trivial upper 1).
    """
    kind = config.mechanism_kind
    pure = kind == "OUTPUT_PERTURB_DP" or kind == "OUTPUT_PERTURB_MDP"
    delta = 0.0 if pure else config.delta
    out = {}
    if kind.endswith("_DP"):
        q = BoundQuery(params=PrivacyParams(eps=eps, delta=delta),
                       n=config.n_samples, diam=2.0)
        out["dp_lecam"] = bounds_mod.dp_lecam_bound(q)
        qa = BoundQuery(params=PrivacyParams(eps=eps, delta=delta, alpha=2.0),
                        n=config.n_samples, diam=2.0,
                        coord_diam_sq_sum=float(problem.dim))
        out["rdp_unbiased"] = bounds_mod.unbiased_rdp_bound(qa)
    else:
        domain = NormedSpaceSpec(dim=problem.dim, norm="l2")
        q = BoundQuery(params=PrivacyParams(eps_metric=eps, delta=delta),
                       n=config.n_samples,
                       d_eff=effective_dimension(domain))
        out["mdp_lecam"] = bounds_mod.mdp_lecam_bound(q)
        out["mdp_fano"] = bounds_mod.mdp_fano_bound(q)
    return out


def _single_trial(config: SweepConfig, problem: LogRegProblem, release_fn: Callable,
                  eps_idx: int, trial_idx: int) -> tuple:
    """Returns (mse or None, failed draw count)."""
    rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(0, eps_idx, trial_idx)))
    model = ThreatModel(features_minus=problem.features[:-1],
                        labels_minus=problem.labels[:-1],
                        challenge_x=problem.features[-1],
                        challenge_y=float(problem.labels[-1]),
                        query_budget_m=config.n_samples)
    try:
        result = attack_average(model, release_fn, config.lam, rng)
    except AllFailedError:
        return None, config.n_samples
    return result.mse, result.failures


def _bootstrap_ci(values: np.ndarray, rng: np.random.Generator,
                  resamples: int = 10_000) -> tuple:
    if values.size == 0:
        return math.inf, math.inf
    if values.size == 1:
        v = float(values[0])
        return v, v
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi)


def run_sweep(config: SweepConfig) -> SweepResult:
    """Execute the full protocol and aggregate per grid point.

    Per epsilon and trial: privatize, attack, score.  The trained
    optimum is shared across trials for output perturbation (the
    mechanism only adds fresh noise); PNSGD retrains inside every draw
    because the pass itself is the mechanism.
    """
    problem = _load_problem(config)
    needs_optimum = config.mechanism_kind.startswith("OUTPUT_PERTURB")
    theta_hat = train_logreg_exact(problem) if needs_optimum else None

    rows = []
    bound_names = _bound_names(config.mechanism_kind)
    for eps_idx, eps in enumerate(config.eps_grid):
        release_fn = _make_release_fn(config, problem, eps, theta_hat)
        tasks = range(config.trials)
        if config.workers > 1:
            with concurrent.futures.ThreadPoolExecutor(config.workers) as pool:
                outcomes = list(pool.map(
                    lambda t: _single_trial(config, problem, release_fn, eps_idx, t),
                    tasks))
        else:
            outcomes = [_single_trial(config, problem, release_fn, eps_idx, t)
                        for t in tasks]
        mses = np.array([m for m, _ in outcomes if m is not None], dtype=float)
        failures = int(sum(f for _, f in outcomes))
        mean_mse = float(mses.mean()) if mses.size else math.inf
        ci_rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(1, eps_idx)))
        ci_low, ci_high = _bootstrap_ci(mses, ci_rng)
        rows.append(SweepRow(epsilon=eps, mechanism=config.mechanism_kind,
                             mean_mse=mean_mse, ci_low=ci_low, ci_high=ci_high,
                             bound_values=evaluate_bounds(config, problem, eps),
                             failures=failures))
    return SweepResult(config=config, bound_names=bound_names, rows=tuple(rows))


def audit_dominance(result: SweepResult) -> bool:
    """Check the headline soundness property: the empirical mean error
    must sit at or above every audited lower bound at every grid point.

    The prior unbiased-attack bound is excluded: this attack is biased,
    so that bound's hypothesis does not apply (its curve is still
    emitted for comparison).  Noiseless runs are exempt too, since the
    release then carries no privacy at all and exact recovery is the
    expected outcome; returns False when skipped for that reason.
    """
    if result.config.noiseless:
        return False
    for row in result.rows:
        for name, value in row.bound_values.items():
            if name not in AUDITED_BOUNDS or not math.isfinite(value):
                continue
            if row.mean_mse < value:
                raise DominanceError(
                    f"mean mse {row.mean_mse} < {name}={value} at eps={row.epsilon}")
    return True


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def emit_csv(result: SweepResult, path) -> None:
    """One row per grid point; byte-deterministic given (config, seed)."""
    if not result.rows:
        raise ValueError("refusing to emit an empty sweep result")
    cols = ["epsilon", "mechanism", "mean_mse", "ci_low", "ci_high",
            *result.bound_names, "failures"]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for row in result.rows:
        cells = [_fmt(row.epsilon), row.mechanism, _fmt(row.mean_mse),
                 _fmt(row.ci_low), _fmt(row.ci_high)]
        cells += [_fmt(row.bound_values[name]) for name in result.bound_names]
        cells.append(str(row.failures))
        buf.write(",".join(cells) + "\n")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(buf.getvalue())


def parse_sweep_csv(path) -> list:
    """Read back an emitted sweep CSV as a list of dicts (floats parsed)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    out = []
    for line in lines[1:]:
        cells = line.split(",")
        row = {}
        for key, cell in zip(header, cells):
            if key == "mechanism":
                row[key] = cell
            elif key == "failures":
                row[key] = int(cell)
            else:
                row[key] = float(cell)
        out.append(row)
    return out


def emit_bounds_csv(rows: Sequence, path) -> None:
    """Bound curves: epsilon, bound_name, value, validity_flag."""
    if not rows:
        raise ValueError("refusing to emit an empty bounds table")
    buf = io.StringIO()
    buf.write("epsilon,bound_name,value,validity_flag\n")
    for eps, name, value, flag in rows:
        buf.write(f"{_fmt(eps)},{name},{_fmt(value)},{flag.value}\n")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(buf.getvalue())


_SVG_W, _SVG_H = 760, 480
_MARGIN = 60.0
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")


def _log_points(xs, ys) -> list:
    return [(x, math.log10(y)) for x, y in zip(xs, ys)
            if math.isfinite(y) and y > 0]


def _svg_path(points, x_map, y_map) -> str:
    return " ".join(f"{x_map(x):.2f},{y_map(y):.2f}" for x, y in points)


def emit_svg(result: SweepResult, path) -> None:
    """Static SVG 1.1 line chart, log-scaled y axis: one polyline per
    bound plus one for the empirical mean, and a shaded CI polygon."""
    if not result.rows:
        raise ValueError("refusing to emit an empty sweep result")
    xs = [row.epsilon for row in result.rows]
    series = {"empirical": [row.mean_mse for row in result.rows]}
    for name in result.bound_names:
        series[name] = [row.bound_values[name] for row in result.rows]
    band_lo = [row.ci_low for row in result.rows]
    band_hi = [row.ci_high for row in result.rows]

    logvals = [math.log10(v) for vals in series.values() for v in vals
               if math.isfinite(v) and v > 0]
    logvals += [math.log10(v) for v in band_lo + band_hi if math.isfinite(v) and v > 0]
    if not logvals:
        raise ValueError("nothing finite to plot")
    ymin, ymax = min(logvals) - 0.2, max(logvals) + 0.2
    xmin, xmax = min(xs), max(xs)
    if xmax == xmin:
        xmax = xmin + 1.0

    def x_map(x):
        return _MARGIN + (x - xmin) / (xmax - xmin) * (_SVG_W - 2 * _MARGIN)

    def y_map(logy):
        return _SVG_H - _MARGIN - (logy - ymin) / (ymax - ymin) * (_SVG_H - 2 * _MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_SVG_W}" height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]
    band = _log_points(xs, band_hi) + list(reversed(_log_points(xs, band_lo)))
    if band:
        parts.append(f'<polygon points="{_svg_path(band, x_map, y_map)}" '
                     f'fill="#1f77b4" fill-opacity="0.15" stroke="none"/>')
    for idx, (name, vals) in enumerate(series.items()):
        pts = _log_points(xs, vals)
        color = _PALETTE[idx % len(_PALETTE)]
        dash = "" if name == "empirical" else ' stroke-dasharray="6,3"'
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"'
                     f'{dash} points="{_svg_path(pts, x_map, y_map)}"/>')
        label_y = 20 + 16 * idx
        parts.append(f'<text x="{_SVG_W - _MARGIN - 150:.0f}" y="{label_y}" '
                     f'font-size="12" fill="{color}">{name}</text>')
    axis_y = _SVG_H - _MARGIN
    parts.append(f'<line x1="{_MARGIN}" y1="{axis_y}" x2="{_SVG_W - _MARGIN}" '
                 f'y2="{axis_y}" stroke="black"/>')
    parts.append(f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
                 f'y2="{axis_y}" stroke="black"/>')
    for x in xs:
        parts.append(f'<text x="{x_map(x):.1f}" y="{axis_y + 18:.1f}" font-size="10" '
                     f'text-anchor="middle">{x:g}</text>')
    decade = math.ceil(ymin)
    while decade <= ymax:
        parts.append(f'<text x="{_MARGIN - 8:.1f}" y="{y_map(decade) + 4:.1f}" '
                     f'font-size="10" text-anchor="end">1e{decade:d}</text>')
        decade += 1
    parts.append(f'<text x="{_SVG_W / 2:.0f}" y="{_SVG_H - 12}" font-size="12" '
                 f'text-anchor="middle">epsilon</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
