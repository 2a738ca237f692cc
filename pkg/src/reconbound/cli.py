"""Command-line interface.

Subcommands:
  sweep     run the attack-vs-bounds protocol and emit CSV/SVG
  bounds    tabulate lower-bound curves over an epsilon grid
  oracle    exact finite-channel certificates for randomized response
  covering  covering/packing numbers of a distance-matrix file

Exit codes: 0 success, 2 configuration error, 3 dominance violation
(audit failure), 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from . import bounds as bounds_mod
from . import harness, oracle
from .bounds import BoundQuery, validity_check
from .mechanisms import PrivacyParams
from .metric_space import (FiniteMetricSpace, covering_number, packing_number,
                           two_point_space)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reconbound")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a reconstruction sweep")
    p_sweep.add_argument("--config", help="flat key=value config file")
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--out", default=".", help="output directory")
    p_sweep.add_argument("--mechanism", choices=harness.MECHANISM_KINDS)
    p_sweep.add_argument("--eps-grid", help="a:b:step or comma list")
    p_sweep.add_argument("--trials", type=int)
    p_sweep.add_argument("--noiseless", action="store_true", default=None)

    p_bounds = sub.add_parser("bounds", help="tabulate bound curves")
    p_bounds.add_argument("--eps-grid", required=True)
    p_bounds.add_argument("--diam", type=float, required=True)
    p_bounds.add_argument("--n", type=int, default=1)
    p_bounds.add_argument("--delta", type=float, default=0.0)
    p_bounds.add_argument("--alpha", type=float, default=2.0)
    p_bounds.add_argument("--coord-diam-sq-sum", type=float, default=None)
    p_bounds.add_argument("--d-eff", type=float, default=None)
    p_bounds.add_argument("--out", default="bounds.csv")

    p_oracle = sub.add_parser("oracle", help="finite-channel certificates")
    p_oracle.add_argument("--eps-grid", required=True)
    p_oracle.add_argument("--n", type=int, default=1)
    p_oracle.add_argument("--separation", type=float, default=1.0)
    p_oracle.add_argument("--inputs", type=int, default=2)

    p_cov = sub.add_parser("covering", help="covering/packing of a matrix file")
    p_cov.add_argument("--matrix", required=True)
    p_cov.add_argument("--eta", type=float, required=True)
    p_cov.add_argument("--cap", type=int, default=20)
    return parser


def _cmd_sweep(args) -> int:
    if args.config:
        config = harness.parse_config(args.config)
    else:
        if args.eps_grid is None or args.mechanism is None or args.seed is None:
            raise harness.ConfigError(
                "without --config, all of --eps-grid/--mechanism/--seed are required")
        config = harness.SweepConfig(eps_grid=harness.parse_eps_grid(args.eps_grid),
                                     mechanism_kind=args.mechanism, seed=args.seed)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mechanism is not None:
        overrides["mechanism_kind"] = args.mechanism
    if args.eps_grid is not None:
        overrides["eps_grid"] = harness.parse_eps_grid(args.eps_grid)
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.noiseless is not None:
        overrides["noiseless"] = True
    if overrides:
        config = dataclasses.replace(config, **overrides)

    result = harness.run_sweep(config)
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.join(args.out, f"sweep_{config.mechanism_kind.lower()}")
    harness.emit_csv(result, stem + ".csv")
    harness.emit_svg(result, stem + ".svg")
    for row in result.rows:
        print(f"eps={row.epsilon:g} mean_mse={row.mean_mse:.6g} "
              f"failures={row.failures}")
    print(f"wrote {stem}.csv and {stem}.svg")
    if harness.audit_dominance(result):
        print("dominance audit passed")
    else:
        print("dominance audit skipped (noiseless run)")
    return 0


def _cmd_bounds(args) -> int:
    grid = harness.parse_eps_grid(args.eps_grid)
    trivial = args.diam ** 2
    rows = []
    for eps in grid:
        q = BoundQuery(params=PrivacyParams(eps=eps, eps_metric=eps,
                                            delta=args.delta, alpha=args.alpha),
                       n=args.n, diam=args.diam,
                       coord_diam_sq_sum=(args.coord_diam_sq_sum
                                          if args.coord_diam_sq_sum is not None
                                          else math.nan),
                       d_eff=(args.d_eff if args.d_eff is not None else math.nan))
        values = {
            "dp_lecam": bounds_mod.dp_lecam_bound(q),
            "dp_lecam_renyi": bounds_mod.renyi_dp_lecam_bound(q),
            "mdp_lecam": bounds_mod.mdp_lecam_bound(q),
        }
        if args.coord_diam_sq_sum is not None:
            values["rdp_unbiased"] = bounds_mod.unbiased_rdp_bound(q)
        if args.d_eff is not None:
            values["mdp_fano"] = bounds_mod.mdp_fano_bound(q)
        for name, value in values.items():
            rows.append((eps, name, value, validity_check(value, trivial)))
    harness.emit_bounds_csv(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _cmd_oracle(args) -> int:
    grid = harness.parse_eps_grid(args.eps_grid)
    if args.inputs == 2:
        space = two_point_space(args.separation)
        for eps in grid:
            mech = oracle.randomized_response(eps)
            rep = oracle.lecam_certificate(mech, space, n=args.n)
            print(f"eps={eps:g} exact={rep.exact_risk:.6g} "
                  f"two_point={rep.lecam_bound:.6g} relaxed={rep.bh_bound:.6g} "
                  f"closed_form={rep.dp_bound:.6g} OK")
    else:
        space = _uniform_space(args.inputs, args.separation)
        for eps in grid:
            mech = oracle.randomized_response(eps, k=args.inputs)
            rep = oracle.fano_certificate(mech, space, n=args.n)
            print(f"eps={eps:g} exact_error={rep.exact_error:.6g} "
                  f"info_bound={rep.fano_error_bound:.6g} "
                  f"mutual_info={rep.mutual_info:.6g} OK")
    return 0


def _uniform_space(k: int, separation: float) -> FiniteMetricSpace:
    dist = np.full((k, k), separation, dtype=float)
    np.fill_diagonal(dist, 0.0)
    return FiniteMetricSpace(points=tuple(range(k)), dist=dist)


def _cmd_covering(args) -> int:
    space = FiniteMetricSpace.from_file(args.matrix)
    cov = covering_number(space, args.eta, cap=args.cap)
    pack = packing_number(space, args.eta, cap=args.cap)
    print(f"points={len(space)} eta={args.eta:g} covering={cov} packing={pack}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"sweep": _cmd_sweep, "bounds": _cmd_bounds,
                "oracle": _cmd_oracle, "covering": _cmd_covering}
    try:
        return handlers[args.command](args)
    except ValueError as exc:  # ConfigError and bad flag values alike
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except harness.DominanceError as exc:
        print(f"dominance violation: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
