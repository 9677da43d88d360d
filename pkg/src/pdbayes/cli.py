"""Command-line entry point: ``pdbayes <subcommand> ...``.

Exit codes: 0 success, 1 validation or usage error, 2 numerical failure,
3 I/O error. Every subcommand computes all of its results before writing any
file, and each file is written atomically.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from . import io as pio
from .classify import cross_validate
from .persistence import subsample_diagram, tilt, vr_persistence
from .posterior import (
    PosteriorUnderflowError,
    compute_posterior,
    intensity_grid,
    posterior_cardinality_stats,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return val


def _positive_float(text):
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return val


def _nonneg_float(text):
    val = float(text)
    if not val >= 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdbayes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pd", help="point cloud CSV -> tilted persistence diagram JSON")
    p.add_argument("--input", required=True, help="point cloud CSV")
    p.add_argument("--dim", type=int, choices=(0, 1), default=1)
    p.add_argument("--max-radius", type=_positive_float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--subsample", type=_positive_int, default=None, help="keep at most this many points")
    p.add_argument("--strategy", choices=("top_persistence", "uniform_random"), default="top_persistence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--header", action="store_true", help="the CSV has a header line")

    p = sub.add_parser("posterior", help="posterior intensity and cardinality from diagrams")
    p.add_argument("--config", required=True)
    p.add_argument("--diagrams", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--grid", nargs=4, metavar=("B", "P", "NB", "NP"), default=None)
    p.add_argument("--grid-out", default=None)

    p = sub.add_parser("classify", help="k-fold cross-validated Bayes-factor classification")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="manifest JSON of labeled diagrams")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--c", type=_positive_float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--subsample", type=_positive_int, default=None)
    p.add_argument("--strategy", choices=("top_persistence", "uniform_random"), default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sensitivity", help="polar-curve sensitivity case under one prior combination")
    p.add_argument("--case", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--prior", choices=("informative", "uninformative"), default="informative")
    p.add_argument("--cardinality", choices=("informative", "uniform"), default="informative")
    p.add_argument("--row", choices=("default", "k", "l"), default="default")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-points", type=_positive_int, default=None)
    p.add_argument("--grid", nargs=4, metavar=("B", "P", "NB", "NP"), default=("1", "1", "100", "100"))
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="seeded synthetic point cloud")
    p.add_argument("--kind", choices=("polar", "network"), required=True)
    p.add_argument("--n", type=_positive_int, default=300, help="polar: number of points")
    p.add_argument("--noise-var", type=_nonneg_float, default=0.0, help="polar: noise variance")
    p.add_argument("--offset", type=float, default=None, help="polar: curve offset a in r = a + cos(2 theta)")
    p.add_argument("--scale", type=_positive_float, default=None, help="polar: overall scale")
    p.add_argument("--class", dest="class_id", type=int, default=1, help="network: class 1, 2 or 3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _grid_args(values):
    try:
        b, p, nb, np_ = float(values[0]), float(values[1]), int(values[2]), int(values[3])
    except ValueError:
        raise UsageError("--grid expects B P NB NP (two numbers and two integers)") from None
    if b <= 0 or p <= 0 or nb < 1 or np_ < 1:
        raise UsageError("--grid extents must be > 0 and sizes >= 1")
    return b, p, nb, np_


def cmd_pd(args):
    cloud = pio.read_point_cloud(args.input, header=args.header)
    diagrams = vr_persistence(cloud, max_dim=args.dim, max_radius=args.max_radius)
    pd = tilt(diagrams[args.dim])
    if args.subsample is not None:
        pd = subsample_diagram(pd, args.subsample, args.strategy, args.seed)
    pio.write_diagram(args.out, pd)
    print(f"wrote {len(pd)} H{args.dim} points to {args.out}")


def cmd_posterior(args):
    if args.grid_out and not args.grid:
        raise UsageError("--grid-out needs --grid")
    grid = _grid_args(args.grid) if args.grid else None
    cfg = pio.read_config(args.config).model
    diagrams = [pio.read_diagram(p) for p in args.diagrams]
    n_max = args.n_max if args.n_max is not None else cfg.n_max
    post = compute_posterior(cfg.prior, cfg.obs, cfg.unexpected, diagrams, n_max=n_max)
    rows = intensity_grid(post, *grid) if grid else None
    pio.write_posterior(args.out, post)
    if rows is not None and args.grid_out:
        pio.write_grid(args.grid_out, rows)
    mean, var, mode = posterior_cardinality_stats(post)
    print(f"posterior over {post.m} diagram(s): cardinality mean {mean:.4f}, variance {var:.4f}, MAP {mode}")


def cmd_classify(args):
    run = pio.read_config(args.config)
    spec = run.classifier
    k = args.folds if args.folds is not None else spec.k
    c = args.c if args.c is not None else spec.c
    seed = args.seed if args.seed is not None else spec.seed
    sub_k = args.subsample if args.subsample is not None else spec.subsample
    strategy = args.strategy or spec.strategy
    data = pio.read_manifest(args.data)
    if sub_k is not None:
        data = [(lbl, subsample_diagram(pd, sub_k, strategy, seed)) for lbl, pd in data]
    report = cross_validate(data, k, run.model, c, seed)
    out = report.to_dict()
    out.update({"k": k, "c": c, "seed": seed})
    pio.write_json(args.out, out)
    print(f"{k}-fold AUC {report.auc:.4f}")


def cmd_sensitivity(args):
    from . import sensitivity as sens

    b, p, nb, np_ = _grid_args(args.grid)
    kwargs = {}
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.n_points is not None:
        kwargs["n"] = args.n_points
    res = sens.run_case(args.case, args.prior, args.cardinality, args.row, **kwargs)
    rows = intensity_grid(res.posterior, b, p, nb, np_)
    mean, var, mode = res.stats()
    obs, unexpected = sens.case_models(args.case, args.row)
    summary = {
        "case": args.case,
        "row": args.row,
        "prior": args.prior,
        "cardinality": args.cardinality,
        "noise_var": sens.CASE_NOISE[args.case],
        "sigma_yo": obs.sigma_yo,
        "mu_yu": unexpected.mu_yu,
        "rho_y": unexpected.cardinality.p,
        "M0": unexpected.cardinality.n_max,
        "alpha": obs.alpha,
        "n_points": int(len(res.cloud)),
        "diagram_size": len(res.diagram),
        "cardinality_mean": mean,
        "cardinality_variance": var,
        "cardinality_map": mode,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pio.write_point_cloud(out / "cloud.csv", res.cloud)
    pio.write_diagram(out / "diagram.json", res.diagram)
    pio.write_posterior(out / "posterior.json", res.posterior)
    pio.write_grid(out / "intensity_grid.csv", rows)
    pio.write_pmf(out / "cardinality.csv", res.posterior.cardinality.probs)
    pio.write_json(out / "summary.json", summary)
    print(json.dumps(summary))


def cmd_synth(args):
    from .synthetic import POLAR_OFFSET, POLAR_SCALE, loop_network_generate, polar_curve_sample

    if args.kind == "polar":
        offset = POLAR_OFFSET if args.offset is None else args.offset
        scale = POLAR_SCALE if args.scale is None else args.scale
        cloud = polar_curve_sample(args.n, args.noise_var, args.seed, offset=offset, scale=scale)
    else:
        cloud = loop_network_generate(args.class_id, args.seed)
    pio.write_point_cloud(args.out, cloud)
    print(f"wrote {len(cloud)} points to {args.out}")


COMMANDS = {
    "pd": cmd_pd,
    "posterior": cmd_posterior,
    "classify": cmd_classify,
    "sensitivity": cmd_sensitivity,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    try:
        COMMANDS[args.command](args)
    except PosteriorUnderflowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
