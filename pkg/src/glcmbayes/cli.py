"""Command-line entry points.

Subcommands: build-glcm, simulate, fit, cluster, baseline, evaluate.
Settings may come from a flat key=value config file (``--config``);
explicit command-line flags override config values, which override the
built-in defaults.  Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .glcm import BinSpec, GrayImage, build_glcm, quantile_bins
from .pipeline import PROFILES, baseline_command, cluster_command, evaluate_command, fit_command, simulate_command
from .sampler import Hyperparams
from .simulate import SimConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="glcmbayes",
        description="GLCM construction, simulation, Bayesian nonparametric "
        "clustering, baselines, and evaluation.",
        epilog="Config file keys equal the long option names with dashes "
        "replaced by underscores (e.g. 'n_iter=4000').",
    )
    parser.add_argument("--config", help="flat key=value settings file")
    sub = parser.add_subparsers(dest="mode", required=True)

    g = sub.add_parser("build-glcm", help="bin images and tally co-occurrences")
    g.add_argument("--images", nargs="+", required=True, help="plain-text intensity matrices")
    g.add_argument("--masks", nargs="*", default=None, help="matching 0/1 mask files")
    g.add_argument("--k", type=int, default=16, help="gray-level count")
    g.add_argument("--lo-q", type=float, default=0.025, help="lower clipping quantile")
    g.add_argument("--hi-q", type=float, default=0.975, help="upper clipping quantile")
    g.add_argument("--offset", type=int, default=1, help="pixel pair offset")
    g.add_argument("--directions", type=int, default=8, choices=(4, 8))
    g.add_argument("--bins", help="reuse bin edges from this file")
    g.add_argument("--save-bins", help="write the fitted bin edges here")
    g.add_argument("--out-dir", required=True)

    s = sub.add_parser("simulate", help="generate synthetic GLCM cohorts")
    s.add_argument("--s", type=float, required=True, help="latent covariance scale")
    s.add_argument("--skew", default=None, help="skew shape a1,a2 (omit for normal)")
    s.add_argument("--replicates", type=int, default=1)
    s.add_argument("--subjects-per-class", type=int, default=20)
    s.add_argument("--points", type=int, default=10000, help="latent points per surface")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="run the MCMC on a cohort manifest")
    f.add_argument("--manifest", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--profile", choices=tuple(PROFILES), default=None,
                   help="named iteration profile (desk or full)")
    f.add_argument("--n-iter", type=int, default=20000)
    f.add_argument("--n-burn", type=int, default=10000)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--intercept", action="store_true", help="prepend an intercept covariate")
    f.add_argument("--surfaces-format", choices=("text", "binary"), default="text")
    f.add_argument("--init", choices=("preclustered", "neutral"), default="preclustered")

    c = sub.add_parser("cluster", help="cluster stored posterior-mean surfaces")
    c.add_argument("--fit-dir", required=True)
    c.add_argument("--out", default=None)
    c.add_argument("--g-max", type=int, default=None)

    b = sub.add_parser("baseline", help="feature-space baseline clustering")
    b.add_argument("--manifest", required=True)
    b.add_argument("--method", choices=("hc", "km", "gmm"), required=True)
    b.add_argument("--g", type=int, required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None)

    e = sub.add_parser("evaluate", help="compare predicted labels with truth")
    e.add_argument("--truth", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--out", default=None)
    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        settings = io.read_keyvalues(known.config)
        coerced = {}
        for key, value in settings.items():
            for cast in (int, float):
                try:
                    coerced[key] = cast(value)
                    break
                except ValueError:
                    continue
            else:
                coerced[key] = value
        parser.set_defaults(**coerced)
    return parser.parse_args(argv)


def _cmd_build_glcm(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = []
    for i, img_path in enumerate(args.images):
        pixels = io.read_matrix(img_path)
        mask = None
        if args.masks:
            mask = io.read_matrix(args.masks[i]) > 0.5
        images.append(GrayImage(pixels=pixels, mask=mask))
    if args.bins:
        edges = np.loadtxt(args.bins)
        bins = BinSpec(K=args.k, edges=edges, lo_q=args.lo_q, hi_q=args.hi_q)
    else:
        pooled = np.concatenate([im.masked_values for im in images])
        bins = quantile_bins(pooled, args.k, args.lo_q, args.hi_q)
    if args.save_bins:
        np.savetxt(args.save_bins, bins.edges)
    for img_path, image in zip(args.images, images):
        g = build_glcm(image, bins, offset=args.offset, directions=args.directions)
        io.write_glcm(out / (Path(img_path).stem + ".glcm"), g.counts)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    skew = None
    if args.skew:
        a1, a2 = (float(v) for v in str(args.skew).split(","))
        skew = (a1, a2)
    cfg = SimConfig(
        s=args.s,
        skew=skew,
        subjects_per_class=args.subjects_per_class,
        points_per_surface=args.points,
        seed=args.seed,
    )
    simulate_command(cfg, args.out, replicates=args.replicates)
    return EXIT_OK


def _cmd_fit(args) -> int:
    n_iter, n_burn = args.n_iter, args.n_burn
    if args.profile:
        n_iter = PROFILES[args.profile]["n_iter"]
        n_burn = PROFILES[args.profile]["n_burn"]
    hp = Hyperparams.default(p=2 if args.intercept else 1, n_iter=n_iter, n_burn=n_burn, seed=args.seed)
    fit_command(
        args.manifest,
        args.out,
        hp,
        intercept=args.intercept,
        surfaces_format=args.surfaces_format,
        init=args.init,
    )
    return EXIT_OK


def _cmd_cluster(args) -> int:
    result = cluster_command(args.fit_dir, args.out, args.g_max)
    print(f"selected rank: {result['rank']}")
    return EXIT_OK


def _cmd_baseline(args) -> int:
    result = baseline_command(args.manifest, args.method, args.g, seed=args.seed, out_dir=args.out)
    if "misassignment" in result:
        print(f"misassignment={result['misassignment']:.6g} chi2={result['chi2']:.6g}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    result = evaluate_command(args.truth, args.pred, args.out)
    print(f"misassignment={result['misassignment']:.6g} chi2={result['chi2']:.6g} N={result['N']}")
    return EXIT_OK


_COMMANDS = {
    "build-glcm": _cmd_build_glcm,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "cluster": _cmd_cluster,
    "baseline": _cmd_baseline,
    "evaluate": _cmd_evaluate,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    parser = _build_parser()
    try:
        args = _apply_config(parser, argv)
        return _COMMANDS[args.mode](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
