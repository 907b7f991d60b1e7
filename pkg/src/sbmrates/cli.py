"""Command-line entry point: sample, estimate, bench, bounds, check."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .bench import ESTIMATORS, ExperimentPlan, default_workers, run_plan
from .bounds import k_class_lower_rate, two_class_lower_bound
from .functionals import tau_plugin
from .io import load_model, read_edge_list, write_edge_list
from .likelihood import check_kappa_conditions, mle_k_class, mle_two_class
from .model import (Graphon, Labelling, SbmSpec, SubmodelK, sample_fixed_design,
                    sample_graphon, sample_random_design)
from .spectral import (check_conditions, spec_theta, spectral_two_class,
                       spectral_two_class_sparse)

METHODS = ("spectral2", "spectral2-sparse", "spec-theta", "mle", "mle2", "mle-k", "tau-plugin")


class UsageError(Exception):
    pass


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(type(o).__name__)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=_json_default))


def _model_arg(args, required=True):
    if getattr(args, "model", None):
        return load_model(args.model)
    if getattr(args, "staircase5", False):
        return SubmodelK.staircase5(getattr(args, "theta", None) or 0.0)
    if getattr(args, "theta", None) is not None:
        return SbmSpec.two_class(args.theta)
    if required:
        raise UsageError("give --model FILE, --staircase5 or --theta")
    return None


def cmd_sample(args) -> int:
    model = _model_arg(args)
    rng = np.random.default_rng(args.seed)
    if isinstance(model, Graphon):
        g = sample_graphon(model, args.n, rng)
    else:
        spec = model.spec(args.alpha) if isinstance(model, SubmodelK) else \
            SbmSpec(model.pi, model.M, args.alpha)
        if args.design == "fixed":
            g = sample_fixed_design(spec.connectivity, Labelling.round_robin(args.n, spec.k), rng)
        else:
            g = sample_random_design(spec, args.n, rng)[0]
    if args.out:
        write_edge_list(g, args.out)
    else:
        print(f"# n={g.n}")
        for i, j in g.edges():
            print(i, j)
    return 0


def cmd_estimate(args) -> int:
    g = read_edge_list(args.input, args.n)
    rng = np.random.default_rng(args.seed)
    m = args.method
    out = {"method": m, "n": g.n}
    if m == "spectral2":
        r = spectral_two_class(g)
        out.update(theta_hat=r.theta, eigenvalue=r.eigenvalue, flags=list(r.flags))
    elif m == "spectral2-sparse":
        r = spectral_two_class_sparse(g, args.alpha)
        out.update(theta_hat=r.theta, eigenvalue=r.eigenvalue, flags=list(r.flags))
    elif m == "spec-theta":
        k = args.k or (_model_arg(args).k if (args.model or args.staircase5) else None)
        if k is None:
            raise UsageError("spec-theta needs --k or a model")
        r = spec_theta(g, k, args.alpha, rng, args.kappa)
        out.update(theta_hat=r.theta, cluster_sizes=list(r.cluster_sizes),
                   selected_size=int(r.selected.size), flags=list(r.flags))
    elif m in ("mle", "mle2"):
        out.update(mle_two_class(g, args.mode).as_dict())
    elif m == "mle-k":
        sub = _model_arg(args)
        if not isinstance(sub, SubmodelK):
            raise UsageError("mle-k needs a submodel via --model or --staircase5")
        out.update(mle_k_class(g, sub, args.mode, rng).as_dict())
    else:
        r = tau_plugin(g, args.k, rng)
        out.update(tau_hat=r.tau, method_kind=r.method, flags=list(r.flags))
    _emit(out)
    return 0


def cmd_bench(args) -> int:
    if args.plan:
        try:
            plan = ExperimentPlan.from_json(args.plan)
        except (OSError, KeyError, TypeError, ValueError) as err:
            raise UsageError(f"malformed plan: {err}") from err
    else:
        if not (args.estimator and args.n and args.theta_grid):
            raise UsageError("give --plan FILE or --estimator, --n and --theta-grid")
        plan = ExperimentPlan(_model_arg(args, required=False) or SbmSpec.two_class(0.0),
                              args.estimator, args.n, args.theta_grid, args.alpha, args.trials,
                              args.seed, args.design)
    curve = run_plan(plan, workers=args.workers)
    if args.out:
        curve.write_csv(args.out)
    else:
        sys.stdout.write(curve.to_csv())
    return 0


def cmd_bounds(args) -> int:
    report = {"two_class": two_class_lower_bound(args.n).as_dict()}
    if args.k:
        report["k_class"] = k_class_lower_rate(args.n, args.k, args.alpha).as_dict()
    _emit(report)
    c = report["two_class"]["constants"]
    rows = [("n", args.n), ("s_n", c["s_n"]), ("theta_n", c["theta_n"]), ("r(1/3)", c["r_delta"]),
            ("rate", report["two_class"]["rate"]), ("rate*n", c["rate_times_n"]),
            ("1/107", c["c1_claimed"])]
    if args.k:
        rows.append((f"k/(n alpha), k={args.k}", report["k_class"]["rate"]))
    for name, val in rows:
        print(f"{name:>22}  {val:.6g}", file=sys.stderr)
    return 0


def cmd_check(args) -> int:
    sub = _model_arg(args)
    if not isinstance(sub, SubmodelK):
        raise UsageError("check needs a submodel via --model or --staircase5")
    out = {"kappa_conditions": check_kappa_conditions(sub, args.n, args.d).__dict__}
    if sub.k >= 3:
        out["spectral_conditions"] = check_conditions(sub, args.n, args.alpha, args.C,
                                                      args.C_s, args.c).as_dict()
    _emit(out)
    return 0


def _model_flags(p, theta=True):
    p.add_argument("--model", help="JSON model description")
    p.add_argument("--staircase5", action="store_true", help="five-class staircase model")
    if theta:
        p.add_argument("--theta", type=float, help="two-class model with this theta")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbmrates",
                                     description="Block-model parameter estimation and risk sweeps.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a graph and write an edge list")
    _model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--design", choices=("random", "fixed"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", help="run one estimator on one graph")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--n", type=int, help="vertex count if the file has no header")
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--kappa", type=float)
    p.add_argument("--mode", choices=("exact", "heuristic"), default="heuristic")
    p.add_argument("--seed", type=int, default=0)
    _model_flags(p, theta=False)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="Monte Carlo risk sweep to CSV")
    p.add_argument("--plan", help="JSON experiment plan")
    p.add_argument("--estimator", choices=ESTIMATORS)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--theta-grid", type=float, nargs="+")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--design", choices=("random", "fixed"), default="random")
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--out")
    _model_flags(p, theta=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("bounds", help="lower-bound reports")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("check", help="recovery and separation conditions for a submodel")
    _model_flags(p, theta=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--C-s", dest="C_s", type=float, default=5.0)
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--d", type=float, default=1.0)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"sbmrates: error: {err}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as err:
        print(f"sbmrates: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
