"""Command-line entry point: ``spectral-umap {synth,compress,embed,pipeline,eval,plot}``.

Exit codes: 0 success, 1 I/O or input-file error, 2 usage or parameter error.
Any long option may also come from a ``key=value`` file given with
``--config``; options on the command line win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ._errors import ParameterError, ParseError
from .coarsen import (
    CompressParams,
    compress,
    lift_embedding,
    read_map_csv,
    write_map_csv,
    write_sizes_csv,
)
from .dataset import SYNTHETIC_KINDS, DenseDataset, generate_synthetic, load_csv, save_csv
from .metrics import EvalReport, StageTimer, aggregate_purity, knn_preservation, trustworthiness
from .plot import scatter_svg
from .umap_ import UmapParams, umap_embed

log = logging.getLogger("spectral_umap")

EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


@dataclass
class PipelineConfig:
    input: Path
    output_dir: Path
    compression: CompressParams
    umap: UmapParams
    k_metric: int = 15
    has_labels: bool = False
    plot: Dict[str, int] = field(default_factory=lambda: {"width": 800, "height": 800})


# ---------------------------------------------------------------------------
# argument types


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return value


def _ratio(text):
    value = float(text)
    if not value >= 1:
        raise argparse.ArgumentTypeError(f"ratio must be >= 1, got {text}")
    return value


def _fraction(text):
    value = float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def _flag(text):
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text}")


# ---------------------------------------------------------------------------
# parser


def _add_compress_flags(p):
    g = p.add_argument_group("compression")
    g.add_argument("--ratio", type=_ratio, default=5.0, help="target compression ratio N/P")
    g.add_argument("--k", type=_positive_int, default=10, help="neighbours in the coarsening graph")
    g.add_argument("--metric", choices=("euclidean", "cosine"), default="euclidean")
    g.add_argument("--K", type=_positive_int, default=10, dest="K", help="number of test vectors")
    g.add_argument("--sweeps", type=_positive_int, default=10, help="Gauss-Seidel sweeps")
    g.add_argument("--max-levels", type=_positive_int, default=10)
    g.add_argument("--min-affinity", type=_fraction, default=None)
    g.add_argument("--knn-method", choices=("auto", "brute", "kdtree"), default="auto")
    g.add_argument("--seed", type=int, default=0)


def _add_umap_flags(p):
    g = p.add_argument_group("umap")
    g.add_argument("--n-neighbors", type=_positive_int, default=15)
    g.add_argument("--min-dist", type=_nonneg_float, default=0.1)
    g.add_argument("--spread", type=_nonneg_float, default=1.0)
    g.add_argument("--n-epochs", type=_positive_int, default=None)
    g.add_argument("--learning-rate", type=_nonneg_float, default=1.0)
    g.add_argument("--negative-sample-rate", type=int, default=5)
    g.add_argument("--m", type=_positive_int, default=2, help="output dimension")
    g.add_argument("--init", choices=("spectral", "random"), default="spectral")
    g.add_argument("--umap-metric", choices=("euclidean", "cosine"), default="euclidean")
    g.add_argument("--umap-seed", type=int, default=None, help="defaults to --seed")
    g.add_argument("--threads", type=_positive_int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spectral-umap",
        description="UMAP on spectrally coarsened data.",
    )
    parser.add_argument("--config", type=Path, default=None, help="key=value option file")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--noise", type=_nonneg_float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clusters", type=_positive_int, default=2, help="blob count")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("compress", help="coarsen a dataset into pseudo-samples")
    p.add_argument("input", type=Path)
    p.add_argument("--has-labels", type=_flag, nargs="?", const=True, default=False)
    p.add_argument("--out-dir", type=Path, required=True)
    _add_compress_flags(p)

    p = sub.add_parser("embed", help="run UMAP on a dataset")
    p.add_argument("input", type=Path)
    p.add_argument("--has-labels", type=_flag, nargs="?", const=True, default=False)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_umap_flags(p)

    p = sub.add_parser("pipeline", help="compress, embed, lift and evaluate")
    p.add_argument("input", type=Path)
    p.add_argument("--has-labels", type=_flag, nargs="?", const=True, default=False)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--k-metric", type=_positive_int, default=15)
    p.add_argument("--width", type=_positive_int, default=800)
    p.add_argument("--height", type=_positive_int, default=800)
    _add_compress_flags(p)
    _add_umap_flags(p)

    p = sub.add_parser("eval", help="score an embedding against its source data")
    p.add_argument("original", type=Path)
    p.add_argument("embedding", type=Path)
    p.add_argument("--has-labels", type=_flag, nargs="?", const=True, default=False)
    p.add_argument("--embedding-has-labels", type=_flag, nargs="?", const=True, default=False)
    p.add_argument("--map", type=Path, default=None, help="coarsening map CSV")
    p.add_argument("--k-metric", type=_positive_int, default=15)
    p.add_argument("--out", type=Path, default=None, help="write the report as JSON")

    p = sub.add_parser("plot", help="render an embedding CSV as an SVG scatter")
    p.add_argument("embedding", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--width", type=_positive_int, default=800)
    p.add_argument("--height", type=_positive_int, default=800)
    p.add_argument("--labels", choices=("auto", "yes", "no"), default="auto")
    return parser, sub


def read_config(path) -> Dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", lineno)
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config(subparser, config):
    """Fold config entries in as defaults, converted like their flags."""
    actions = {a.dest: a for a in subparser._actions if a.option_strings}
    defaults = {}
    for key, raw in config.items():
        action = actions.get(key)
        if action is None:
            raise _UsageError(f"unknown config key {key!r} for this command")
        try:
            value = action.type(raw) if action.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise _UsageError(f"config key {key!r}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise _UsageError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
        defaults[key] = value
    subparser.set_defaults(**defaults)
    for action in subparser._actions:
        if action.dest in defaults:
            action.required = False


def parse_args(argv):
    parser, sub = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        config = read_config(args.config)
        _apply_config(sub.choices[args.command], config)
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# commands


def _compress_params(args):
    return CompressParams(
        k=args.k,
        metric=args.metric,
        K=args.K,
        sweeps=args.sweeps,
        seed=args.seed,
        ratio=args.ratio,
        max_levels=args.max_levels,
        min_affinity=args.min_affinity,
        method=args.knn_method,
    )


def _umap_params(args):
    return UmapParams(
        n_neighbors=args.n_neighbors,
        n_components=args.m,
        min_dist=args.min_dist,
        spread=args.spread,
        n_epochs=args.n_epochs,
        learning_rate=args.learning_rate,
        negative_sample_rate=args.negative_sample_rate,
        seed=args.seed if args.umap_seed is None else args.umap_seed,
        init=args.init,
        metric=args.umap_metric,
        n_threads=args.threads,
    ).validate()


def write_embedding_csv(path, embedding, labels=None) -> None:
    """Embedding rows ``y1,...,ym[,label]`` at 9 significant digits."""
    embedding = np.asarray(embedding)
    with open(path, "w") as fh:
        for i, row in enumerate(embedding):
            line = ",".join(f"{v:.9g}" for v in row)
            if labels is not None:
                line += f",{int(labels[i])}"
            fh.write(line + "\n")


def cmd_synth(args):
    data = generate_synthetic(args.kind, args.n, args.noise, args.seed, args.clusters)
    save_csv(data, args.out)
    log.info("wrote %d samples to %s", data.n_samples, args.out)
    return EXIT_OK


def _write_compression(out_dir, coarse, cmap):
    out_dir.mkdir(parents=True, exist_ok=True)
    save_csv(coarse.data, out_dir / "coarse.csv")
    write_map_csv(cmap, out_dir / "map.csv")
    write_sizes_csv(coarse, out_dir / "sizes.csv")


def cmd_compress(args):
    data = load_csv(args.input, args.has_labels)
    coarse, cmap = compress(data, _compress_params(args))
    _write_compression(args.out_dir, coarse, cmap)
    print(f"achieved_ratio={data.n_samples / coarse.n_coarse:.6g}")
    print(f"n_fine={data.n_samples} n_coarse={coarse.n_coarse}")
    return EXIT_OK


def cmd_embed(args):
    data = load_csv(args.input, args.has_labels)
    params = _umap_params(args)
    embedding = umap_embed(data, params)
    write_embedding_csv(args.out, embedding, data.labels)
    return EXIT_OK


def _eval_k(requested, n):
    k = min(requested, (n - 1) // 2)
    if k < 1:
        raise ParameterError(f"dataset with {n} samples is too small to evaluate")
    if k != requested:
        log.warning("k_metric lowered from %d to %d for n=%d", requested, k, n)
    return k


def run_pipeline(config: PipelineConfig, data: Optional[DenseDataset] = None):
    """Compress, embed, lift and evaluate; write every artefact to
    ``config.output_dir`` and return the :class:`EvalReport`."""
    if data is None:
        data = load_csv(config.input, config.has_labels)
    if config.umap.n_neighbors >= data.n_samples:
        raise ParameterError("n_neighbors must be smaller than the sample count")
    timer = StageTimer()
    with timer.stage("compress"):
        coarse, cmap = compress(data, config.compression)
    if config.umap.n_neighbors >= coarse.n_coarse:
        raise ParameterError(
            f"only {coarse.n_coarse} pseudo-samples remain; lower --n-neighbors or --ratio"
        )
    log.info("compressed %d -> %d samples", data.n_samples, coarse.n_coarse)
    with timer.stage("embed"):
        coarse_embedding = umap_embed(coarse.data, config.umap)
    with timer.stage("lift"):
        embedding = lift_embedding(cmap, coarse_embedding)
    k = _eval_k(config.k_metric, data.n_samples)
    with timer.stage("evaluate"):
        trust = trustworthiness(data, embedding, k)
        keep = knn_preservation(data, embedding, k)
        purity = None if data.labels is None else aggregate_purity(cmap, data.labels)
    report = EvalReport(
        trustworthiness=trust,
        knn_preservation=keep,
        achieved_ratio=data.n_samples / coarse.n_coarse,
        aggregate_purity=purity,
        wall_clock_seconds=dict(timer.durations),
    )

    out = config.output_dir
    _write_compression(out, coarse, cmap)
    write_embedding_csv(out / "coarse_embedding.csv", coarse_embedding, coarse.majority_labels)
    write_embedding_csv(out / "embedding.csv", embedding, data.labels)
    (out / "report.txt").write_text(report.to_kv())
    (out / "report.json").write_text(report.to_json())
    with open(out / "timing.txt", "w") as fh:
        for stage, seconds in timer.durations.items():
            fh.write(f"{stage}\t{seconds:.6f}\n")
        fh.write(f"total\t{timer.total:.6f}\n")
    (out / "coarse_embedding.svg").write_text(
        scatter_svg(coarse_embedding, coarse.majority_labels, **config.plot)
    )
    return report


def cmd_pipeline(args):
    config = PipelineConfig(
        input=args.input,
        output_dir=args.out_dir,
        compression=_compress_params(args),
        umap=_umap_params(args),
        k_metric=args.k_metric,
        has_labels=args.has_labels,
        plot={"width": args.width, "height": args.height},
    )
    report = run_pipeline(config)
    sys.stdout.write(report.to_kv())
    return EXIT_OK


def cmd_eval(args):
    data = load_csv(args.original, args.has_labels)
    emb = load_csv(args.embedding, args.embedding_has_labels)
    if emb.n_samples != data.n_samples:
        raise ParameterError(
            f"embedding has {emb.n_samples} rows but the dataset has {data.n_samples}"
        )
    k = _eval_k(args.k_metric, data.n_samples)
    purity, ratio = None, 1.0
    if args.map is not None:
        cmap = read_map_csv(args.map)
        if cmap.n_fine != data.n_samples:
            raise ParameterError("map size does not match the dataset")
        ratio = cmap.n_fine / cmap.n_coarse
        if data.labels is not None:
            purity = aggregate_purity(cmap, data.labels)
    timer = StageTimer()
    with timer.stage("evaluate"):
        report = EvalReport(
            trustworthiness=trustworthiness(data, emb, k),
            knn_preservation=knn_preservation(data, emb, k),
            achieved_ratio=ratio,
            aggregate_purity=purity,
        )
    report.wall_clock_seconds = dict(timer.durations)
    sys.stdout.write(report.to_kv())
    if args.out is not None:
        args.out.write_text(report.to_json())
    return EXIT_OK


def _read_embedding_for_plot(path, mode):
    raw = np.loadtxt(path, delimiter=",", ndmin=2)
    if raw.size == 0:
        raise ParseError(f"{path}: no rows")
    has_labels = mode == "yes" or (
        mode == "auto" and raw.shape[1] >= 3 and np.all(raw[:, -1] == np.round(raw[:, -1]))
    )
    if has_labels:
        return raw[:, :-1], raw[:, -1].astype(np.int64)
    return raw, None


def cmd_plot(args):
    try:
        coords, labels = _read_embedding_for_plot(args.embedding, args.labels)
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{args.embedding}: {exc}") from None
    if coords.shape[1] < 2:
        raise ParameterError("plot needs at least two embedding columns")
    args.out.write_text(scatter_svg(coords, labels, args.width, args.height))
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "compress": cmd_compress,
    "embed": cmd_embed,
    "pipeline": cmd_pipeline,
    "eval": cmd_eval,
    "plot": cmd_plot,
}


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except _UsageError as exc:
        print(f"spectral-umap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError) as exc:
        print(f"spectral-umap: error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"spectral-umap: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ParameterError as exc:
        print(f"spectral-umap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"spectral-umap: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
