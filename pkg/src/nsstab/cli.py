"""``nsstab`` command line: accuracy sweep, benchmark matrix, CLF reports."""

import argparse
import sys

import numpy as np

from . import experiments
from .calculus import check_decay_disassembled, check_decay_ldgd, check_semiconcavity
from .clf import CLF_LABELS, get_clf, get_family
from .errors import ConfigError, NsstabError
from .systems import SYSTEMS, ControlSystem, artstein_g, get_system

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _print_table(rows, columns):
    print(",".join(columns))
    for r in rows:
        print(",".join(f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c]) for c in columns))


def cmd_case_study(args):
    cfg = experiments.load_config(args.config)
    rows = experiments.run_case_study(cfg, args.out, args.jobs)
    _print_table(rows, experiments.CASE_COLUMNS + ("wall_time",))
    return EXIT_OK


def cmd_bench(args):
    cfg = experiments.load_config(args.config)
    rows = experiments.run_benchmarks(cfg, args.out, args.jobs)
    _print_table(rows, experiments.BENCH_COLUMNS + ("wall_time",))
    return EXIT_OK


def _kinematic_artstein(bound):
    def f(X, U):
        X, U = np.asarray(X, float), np.asarray(U, float)
        w = np.broadcast_to(U, X.shape[:-1] + (1,))[..., 0]
        return artstein_g(X) * w[..., None]
    return ControlSystem(2, 1, f, [[-bound, bound]], "artstein_kin")


def _system_for(label, clf_dim):
    sys_ = get_system(label)
    if clf_dim == sys_.n:
        return sys_
    if label == "artstein" and clf_dim == 2:
        # the 2-D CLFs live on the kinematic circle v' = g(v) w
        return _kinematic_artstein(float(sys_.control_box[0, 1]))
    if label == "endi" and clf_dim == 3:
        return get_system("ni", float(sys_.control_box[0, 1]))
    raise ConfigError(f"CLF of dimension {clf_dim} does not fit system {label!r}")


def cmd_check_clf(args):
    V = get_clf(args.clf)
    sys_ = _system_for(args.system, V.dim)
    rng = np.random.default_rng(args.seed)
    X = rng.uniform(-args.box, args.box, size=(args.samples, V.dim))
    X = X[np.linalg.norm(X, axis=1) > 1e-3]
    family = get_family(args.clf)
    if family is not None:
        rep = check_decay_disassembled(family, sys_, X, args.u_accuracy)
        kind = "disassembled"
    else:
        rep = check_decay_ldgd(V, sys_, X, args.u_accuracy)
        kind = "ldgd"
    margins = np.asarray(rep.margins)
    print(f"decay ({kind}) on {sys_.label} with {args.clf}: {int(np.sum(margins < 0))}"
          f"/{len(margins)} samples with negative margin, max margin {margins.max():.6g}")
    box = np.tile([-args.box, args.box], (V.dim, 1))
    sc = check_semiconcavity(V, box, args.C, n_pairs=args.pairs, seed=args.seed)
    print(f"semiconcavity (C={args.C}, {args.pairs} pairs): "
          f"{'pass' if sc.passed else 'fail'}, {len(sc.violations)} violations")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="nsstab",
                                description="CLF-based nonsmooth stabilization experiments")
    sub = p.add_subparsers(dest="command", required=True)

    cs = sub.add_parser("case-study", help="accuracy sweep on the three-wheel robot")
    cs.add_argument("--config", default=None, help="JSON config (defaults if omitted)")
    cs.add_argument("--out", default=None, help="output directory (overrides config)")
    cs.add_argument("--jobs", type=int, default=1, help="worker processes")
    cs.set_defaults(func=cmd_case_study)

    b = sub.add_parser("bench", help="benchmark matrix with stability verdicts")
    b.add_argument("--config", default=None)
    b.add_argument("--out", default=None)
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("check-clf", help="decay and semiconcavity reports for a CLF")
    c.add_argument("--system", required=True, choices=sorted(SYSTEMS))
    c.add_argument("--clf", required=True, choices=list(CLF_LABELS))
    c.add_argument("--samples", type=int, default=100)
    c.add_argument("--box", type=float, default=1.0, help="sample from [-box, box]^n")
    c.add_argument("--C", type=float, default=10.0, help="semiconcavity constant")
    c.add_argument("--pairs", type=int, default=10_000)
    c.add_argument("--u-accuracy", type=float, default=1e-6)
    c.add_argument("--seed", type=int, default=None)
    c.set_defaults(func=cmd_check_clf)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "seed", "absent") is None:
            args.seed = experiments.load_config().seed
        if getattr(args, "samples", 1) < 1:
            raise ConfigError("--samples must be at least 1")
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be at least 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"nsstab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NsstabError as exc:
        print(f"nsstab: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
