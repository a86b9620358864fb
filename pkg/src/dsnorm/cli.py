"""Command-line interface: ``dsnorm <subcommand> ...``.

Exit status is 0 on success, 1 for bad input or usage, 2 when a numerical
routine fails to converge (the message suggests a larger epsilon).
"""

import argparse
import contextlib
import logging
import os
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .datagen import (
    BallNoiseSpec,
    CircleSpec,
    GaussianHeteroNoiseSpec,
    ScrnaSpec,
    add_ball_noise,
    add_gaussian_hetero_noise,
    gen_circle,
    gen_scrna,
    load_matrix_market,
    make_rng,
    subsample_by_label,
)
from .exceptions import DsnormError, InputError, NumericError
from .experiments import (
    ConvergenceStudySpec,
    export_csv,
    probe_epsilon,
    run_convergence_study,
    run_eigen_study,
    run_scrna_study,
)
from .kernel import KernelMatrix, gaussian_kernel
from .normalize import VARIANTS, AffinityMatrix, SinkhornConfig, normalize
from .spectral import decompose, embed2d

logger = logging.getLogger("dsnorm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _int_list(text):
    return [int(round(x)) for x in _float_list(text)]


def _label_counts(text):
    pairs = []
    for item in text.split(","):
        label, _, count = item.partition(":")
        try:
            pairs.append((int(label), int(count)))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected label:count pairs, got {item!r}") from exc
    return pairs


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InputError(f"{path}:{lineno}: expected 'key = value'")
            cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _sinkhorn_args(p):
    p.add_argument("--delta", type=float, default=1e-12, help="Sinkhorn tolerance")
    p.add_argument("--max-iters", type=int, default=10**6, help="Sinkhorn iteration cap")


def build_parser():
    parser = _Parser(prog="dsnorm", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file; command-line flags take precedence")
    parser.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("kernel", help="data CSV -> Gaussian kernel CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("normalize", help="kernel CSV -> affinity CSV")
    p.add_argument("--kernel", required=True)
    p.add_argument("--variant", choices=("row", "sym", "doubly"), default="doubly")
    p.add_argument("--out", required=True)
    p.add_argument("--scaling-out")
    p.add_argument("--report-out", help="JSON Sinkhorn report (doubly only)")
    _sinkhorn_args(p)

    p = sub.add_parser("probe-epsilon", help="smallest epsilon on a grid where Sinkhorn converges")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", type=_float_list, help="explicit comma-separated widths")
    p.add_argument("--grid-min", type=float, default=1e-6)
    p.add_argument("--grid-max", type=float, default=1.0)
    p.add_argument("--grid-num", type=int, default=25)
    p.add_argument("--out", help="CSV trace of the probe")
    _sinkhorn_args(p)

    p = sub.add_parser("simulate", help="generate synthetic data")
    sim = p.add_subparsers(dest="dataset", required=True, parser_class=_Parser)
    c = sim.add_parser("circle")
    c.add_argument("--n", type=int, default=1000)
    c.add_argument("--m", type=int, default=2)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--noise", choices=("none", "gaussian", "ball"), default="none")
    c.add_argument("--out", required=True, help="noisy (or clean) data CSV")
    c.add_argument("--clean-out")
    c.add_argument("--angles-out")
    c.add_argument("--noise-mags-out", help="E||noise_i||^2 per point (gaussian only)")
    s = sim.add_parser("scrna")
    s.add_argument("--preset", choices=("full", "desk"), default="desk")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--labels-out", required=True)

    p = sub.add_parser("ingest-mtx", help="Matrix Market genes x cells -> cells CSV")
    p.add_argument("--mtx", required=True)
    p.add_argument("--labels")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--subsample", type=_label_counts, help="label:count,... per label")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out")

    p = sub.add_parser("embed", help="affinity CSV -> 2-D spectral embedding CSV")
    p.add_argument("--affinity", required=True)
    p.add_argument("--variant", choices=("row", "sym", "doubly"), default="doubly")
    p.add_argument("--scaling", help="scaling vector written by normalize (required for row)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("study", help="run a reproducible study")
    st = p.add_subparsers(dest="study", required=True, parser_class=_Parser)
    c = st.add_parser("convergence")
    c.add_argument("--n", type=int, default=200)
    c.add_argument("--dims", type=_int_list, default=[100, 316, 1000, 3162])
    c.add_argument("--trials", type=int, default=5)
    c.add_argument("--epsilon", type=float, default=0.1)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out-dir", required=True)
    _sinkhorn_args(c)
    e = st.add_parser("eigen")
    e.add_argument("--n", type=int, default=400)
    e.add_argument("--m", type=int, default=500)
    e.add_argument("--epsilon", type=float, default=0.1)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--ball-low", type=float, default=0.01)
    e.add_argument("--ball-high", type=float, default=1.0)
    e.add_argument("--out-dir", required=True)
    _sinkhorn_args(e)
    r = st.add_parser("scrna")
    r.add_argument("--preset", choices=("full", "desk"), default="desk")
    r.add_argument("--mtx", help="genes x cells Matrix Market file instead of simulation")
    r.add_argument("--labels", help="label sidecar for --mtx")
    r.add_argument("--subsample", type=_label_counts, help="label:count,... per trial")
    r.add_argument("--epsilon", type=float, required=True)
    r.add_argument("--trials", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--k-max", type=int, default=20)
    r.add_argument("--out-dir", required=True)
    _sinkhorn_args(r)
    return parser


def _sinkhorn_cfg(args):
    return SinkhornConfig(args.delta, args.max_iters)


def _cmd_kernel(args):
    K = gaussian_kernel(io.read_matrix_csv(args.data), args.epsilon)
    io.write_matrix_csv(args.out, K.gram)


def _cmd_normalize(args):
    K = KernelMatrix(io.read_matrix_csv(args.kernel))
    W, report = normalize(K, args.variant, _sinkhorn_cfg(args))
    io.write_matrix_csv(args.out, W.w)
    if args.scaling_out:
        io.write_vector(args.scaling_out, W.scaling)
    if report is not None:
        print(f"sinkhorn: {report.iters} iterations, ratio gap {report.final_ratio_gap:.3g}")
        if args.report_out:
            io.write_json(args.report_out, {
                "iters": report.iters,
                "final_ratio_gap": report.final_ratio_gap,
                "converged": report.converged,
                "rate_estimate": None if np.isnan(report.rate_estimate) else report.rate_estimate,
            })


def _cmd_probe(args):
    X = io.read_matrix_csv(args.data)
    grid = args.grid or np.geomspace(args.grid_min, args.grid_max, args.grid_num)
    best, trace = probe_epsilon(X, grid, _sinkhorn_cfg(args))
    if args.out:
        io.write_rows_csv(args.out, ("epsilon", "converged", "iters"),
                          [(float(e), int(ok), int(it)) for e, ok, it in trace])
    if best is None:
        raise NumericError("Sinkhorn converged for no epsilon on the grid; try larger widths")
    print(repr(best))


def _cmd_simulate(args):
    if args.dataset == "circle":
        X, thetas = gen_circle(CircleSpec(args.n, args.m), make_rng(args.seed, 0), return_angles=True)
        out = X
        if args.noise == "gaussian":
            out, mags = add_gaussian_hetero_noise(X, GaussianHeteroNoiseSpec(), make_rng(args.seed, 1))
            if args.noise_mags_out:
                io.write_vector(args.noise_mags_out, mags)
        elif args.noise == "ball":
            out = add_ball_noise(X, thetas, BallNoiseSpec(), make_rng(args.seed, 1))
        io.write_matrix_csv(args.out, out)
        if args.clean_out:
            io.write_matrix_csv(args.clean_out, X)
        if args.angles_out:
            io.write_vector(args.angles_out, thetas)
    else:
        spec = ScrnaSpec.full() if args.preset == "full" else ScrnaSpec.desk()
        ds = gen_scrna(spec, args.seed)
        io.write_matrix_csv(args.out, ds.data)
        io.write_labels(args.labels_out, ds.labels)


def _cmd_ingest(args):
    ds = load_matrix_market(args.mtx, not args.no_normalize, args.labels)
    if args.subsample:
        ds = subsample_by_label(ds, args.subsample, args.seed)
    io.write_matrix_csv(args.out, ds.data)
    if args.labels_out and ds.labels is not None:
        io.write_labels(args.labels_out, ds.labels)


def _cmd_embed(args):
    w = io.read_matrix_csv(args.affinity)
    variant = "symmetric" if args.variant == "sym" else args.variant
    if args.scaling:
        scaling = io.read_vector(args.scaling)
    elif variant == "row":
        raise InputError("--scaling is required for the row variant")
    else:
        scaling = np.ones(w.shape[0])
    W = AffinityMatrix(w, variant, scaling)
    io.write_matrix_csv(args.out, embed2d(decompose(W, 3)))


def _cmd_study(args):
    os.makedirs(args.out_dir, exist_ok=True)
    path = lambda name: os.path.join(args.out_dir, name)  # noqa: E731
    if args.study == "convergence":
        spec = ConvergenceStudySpec(
            n=args.n, dims=tuple(args.dims), trials=args.trials, epsilon=args.epsilon,
            seed=args.seed, sinkhorn=_sinkhorn_cfg(args),
        )
        result = run_convergence_study(spec, n_jobs=args.threads or 1)
        export_csv(result, path("convergence.csv"))
        io.write_rows_csv(path("slopes.csv"), ("variant", "slope", "fit_dims"), [
            (v, float(result.slopes[v]), " ".join(str(m) for m in result.fit_dims))
            for v in VARIANTS
        ])
        print(f"doubly slope: {result.slopes['doubly']:.4f}")
    elif args.study == "eigen":
        result = run_eigen_study(args.n, args.m, args.epsilon,
                                 BallNoiseSpec(args.ball_low, args.ball_high), args.seed,
                                 cfg=_sinkhorn_cfg(args))
        export_csv(result, path("eigen_summary.csv"))
        export_csv(result, path("eigen_embeddings.csv"), kind="embeddings")
        for v in VARIANTS:
            print(f"{v}: subspace affinity {result.subspace[v]:.4f}")
    else:
        _study_scrna(args, path)


def _study_scrna(args, path):
    spec = ScrnaSpec.full() if args.preset == "full" else ScrnaSpec.desk()
    full = None
    if args.mtx:
        full = load_matrix_market(args.mtx, True, args.labels)
        if full.labels is None:
            raise InputError("--labels is required with --mtx")
    ks = range(1, args.k_max + 1)
    curves, last = [], None
    for t in range(args.trials):
        ds = None
        if full is not None:
            ds = subsample_by_label(full, args.subsample, make_rng(args.seed, t)) if args.subsample else full
        last = run_scrna_study(spec, args.epsilon, make_rng(args.seed, t), ks, dataset=ds,
                               cfg=_sinkhorn_cfg(args))
        curves.append(last.curves)
    last.curves = {v: np.mean([c[v] for c in curves], axis=0) for v in VARIANTS}
    export_csv(last, path("knn_inconsistency.csv"))
    for v in VARIANTS:
        io.write_matrix_csv(path(f"log10_affinity_{v}.csv"), last.log10_affinities[v])
    k1 = {v: float(last.curves[v][0]) for v in VARIANTS}
    ordered = k1["doubly"] < k1["symmetric"] and k1["doubly"] < k1["row"]
    io.write_json(path("summary.json"), {
        "epsilon": args.epsilon, "trials": args.trials, "k1_inconsistency": k1,
        "doubly_lowest_at_k1": ordered,
    })
    print("k=1 inconsistency: " + ", ".join(f"{v} {k1[v]:.4f}" for v in VARIANTS))
    print(f"doubly lowest at k=1: {'yes' if ordered else 'no'}")


_COMMANDS = {
    "kernel": _cmd_kernel,
    "normalize": _cmd_normalize,
    "probe-epsilon": _cmd_probe,
    "simulate": _cmd_simulate,
    "ingest-mtx": _cmd_ingest,
    "embed": _cmd_embed,
    "study": _cmd_study,
}


def _parse(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config is not None:
        _apply_config(parser, read_config(known.config))
    return parser.parse_args(argv)


def _apply_config(parser, cfg):
    """Install config values as parser defaults so explicit flags still win."""
    parsers = [parser] + _all_subparsers(parser)
    known = set()
    for p in parsers:
        values = {}
        for a in p._actions:
            if a.dest not in cfg or isinstance(a, argparse._SubParsersAction):
                continue
            raw = cfg[a.dest]
            if a.nargs == 0:
                value = raw.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    value = a.type(raw) if a.type else raw
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise InputError(f"config {a.dest}: {exc}") from exc
                if a.choices is not None and value not in a.choices:
                    raise InputError(f"config {a.dest}: {raw!r} not in {sorted(a.choices)}")
            values[a.dest] = value
            a.required = False
        p.set_defaults(**values)
        known.update(values)
    unknown = set(cfg) - known - {"config"}
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")


def _all_subparsers(parser):
    found = []
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            for p in a.choices.values():
                found.append(p)
                found.extend(_all_subparsers(p))
    return found


def main(argv=None):
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except (DsnormError, OSError) as exc:
        print(f"dsnorm: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    limits = threadpool_limits(args.threads) if args.threads else contextlib.nullcontext()
    try:
        with limits:
            _COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"dsnorm: numeric failure: {exc}", file=sys.stderr)
        return 2
    except (DsnormError, ValueError, OSError) as exc:
        print(f"dsnorm: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
