"""Command-line pipeline: synth -> train -> recover / oracle -> report, plus render.

Every subcommand writes ``manifest.txt`` (key=value) into its output directory
echoing the resolved flags, so a run can be repeated exactly. Numeric outputs
never contain timings, which keeps them byte-identical across reruns.

Exit codes: 0 success, 2 usage error, 3 I/O or file-format error, 4 numerical failure.
``AEPCA_OUTPUT_ROOT``, when set, is prepended to relative ``--out`` paths.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    PcaModel,
    RankDeficiencyError,
    diagnose,
    eckart_young_gap,
    estimate_variances,
    oracle_pca,
    principal_angles,
    pseudoinverse_residual,
    recover_loading_vectors,
)
from .autoencoder import NumericalError, TrainConfig, train
from .dataio import (
    Dataset,
    FormatError,
    load_params,
    planted_spectrum,
    read_csv_matrix,
    read_idx_images,
    read_matrix,
    save_params,
    synthesize_gaussian,
    write_csv_matrix,
    write_matrix,
    write_pgm_grid,
)
from .matrix import DimensionError, RandomSource

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
ORACLE_MAX_N = 4096
# training manifests include the Eckart-Young gap automatically up to this dimension
AUTO_BOUND_MAX_N = 256
OUTPUT_ROOT_ENV = "AEPCA_OUTPUT_ROOT"


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _shape(text: str) -> tuple[int, int]:
    try:
        h, w = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    return h, w


def _out_dir(path: str) -> Path:
    out = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(_fmt(v.item() if isinstance(v, np.generic) else v) for v in value)
    return "" if value is None else str(value)


def write_manifest(path: Path, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={_fmt(value)}\n")


def read_manifest(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            out[key] = value
    return out


def _base_manifest(args, argv) -> dict:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {"command": args.command, "argv": shlex.join(argv), "version": __version__, **resolved}


def load_dataset(path, *, limit=None, image_shape=None, csv_orientation="observations") -> Dataset:
    """Dispatch on content/extension: PCAE matrix, CSV, or IDX images (optionally gzipped)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == b"PCAE":
        obs = read_matrix(path)
        data = Dataset(np.ascontiguousarray(obs[:, :limit] if limit else obs), f"pcae:{path.name}", image_shape)
    elif path.suffix.lower() in (".csv", ".txt"):
        d = read_csv_matrix(path, csv_orientation)
        obs = d.observations[:, :limit] if limit else d.observations
        data = Dataset(np.ascontiguousarray(obs), d.source_tag, image_shape)
    else:
        data = read_idx_images(path, limit=limit)
    if image_shape is not None and data.image_shape != image_shape:
        data = Dataset(data.observations, data.source_tag, image_shape)
    return data


def save_model(model: PcaModel, directory: Path) -> None:
    write_matrix(model.loading_vectors, directory / "loadings.pcae")
    if model.mean is not None:
        write_matrix(model.mean, directory / "mean.pcae")
    if model.variances is not None:
        write_matrix(model.variances, directory / "variances.pcae")
        write_csv_matrix(model.variances[:, None], directory / "variances.csv")
    if model.singular_values is not None:
        write_matrix(model.singular_values, directory / "singular_values.pcae")
    if model.spectrum is not None:
        write_matrix(model.spectrum, directory / "spectrum.pcae")
    write_manifest(
        directory / "model.txt",
        {"provenance": model.provenance, "n": model.n, "m": model.m, "degenerate": model.degenerate},
    )


def load_model(directory) -> PcaModel:
    directory = Path(directory)
    meta = read_manifest(directory / "model.txt")

    def optional(name):
        path = directory / f"{name}.pcae"
        return read_matrix(path)[:, 0].copy() if path.exists() else None

    return PcaModel(
        mean=optional("mean"),
        loading_vectors=read_matrix(directory / "loadings.pcae").copy(),
        variances=optional("variances"),
        provenance=meta.get("provenance", "unknown"),
        degenerate=meta.get("degenerate") == "true",
        singular_values=optional("singular_values"),
        spectrum=optional("spectrum"),
    )


def _data_args(p):
    p.add_argument("--data", required=True, help="dataset file (PCAE, CSV or IDX images)")
    p.add_argument("--limit", type=int, help="use only the first LIMIT observations")
    p.add_argument("--image-shape", type=_shape, help="HxW for rendering non-IDX data")
    p.add_argument("--csv-orientation", choices=("observations", "variables"), default="observations",
                   help="whether CSV rows are observations (default) or variables")


def _load(args) -> Dataset:
    return load_dataset(args.data, limit=args.limit, image_shape=args.image_shape, csv_orientation=args.csv_orientation)


def _render(vectors, data: Dataset, args, path: Path, extra: dict) -> None:
    if data.image_shape is None:
        raise UsageError("--render needs image data or --image-shape")
    write_pgm_grid(vectors, data.image_shape, args.grid_cols, path)
    extra[f"render_{path.stem}"] = path.name


def cmd_synth(args, argv) -> int:
    stds = np.asarray(args.stds)
    if stds.size != args.n:
        raise UsageError(f"--stds has {stds.size} values but --n is {args.n}")
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    rng = RandomSource(args.seed)
    try:
        spectrum = planted_spectrum(stds, rng, args.mean_norm)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = synthesize_gaussian(spectrum, args.count, rng.spawn(1))
    out = _out_dir(args.out)
    write_matrix(data.observations, out / "data.pcae")
    write_matrix(spectrum.basis, out / "basis.pcae")
    write_matrix(spectrum.stds, out / "stds.pcae")
    write_matrix(spectrum.mean, out / "mean.pcae")
    write_manifest(out / "manifest.txt", _base_manifest(args, argv))
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        weight_decay=args.wd,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        init_scale=args.init_scale,
        tail_average=args.tail_average,
    )


def cmd_train(args, argv) -> int:
    data = _load(args)
    config = _train_config(args)
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not 1 <= args.m < data.n:
        raise UsageError(f"--m must satisfy 1 <= m < n = {data.n}")
    if data.count < config.batch_size:
        raise UsageError(f"dataset has {data.count} observations, fewer than --batch-size {config.batch_size}")
    out = _out_dir(args.out)
    params, report = train(data, args.m, config)
    save_params(params, out / "params")
    with open(out / "loss.csv", "w") as fh:
        fh.write("epoch,loss,recon\n")
        fh.write(f"0,{report.initial_loss!r},\n")
        for k, (total, recon) in enumerate(zip(report.epoch_loss, report.epoch_recon), start=1):
            fh.write(f"{k},{total!r},{recon!r}\n")
    manifest = _base_manifest(args, argv)
    manifest.update(
        n=data.n,
        count=data.count,
        source_tag=data.source_tag,
        initial_loss=report.initial_loss,
        final_loss=report.final_loss,
        final_recon=report.final_recon,
        averaged_steps=report.averaged_steps,
        pseudoinverse_residual=pseudoinverse_residual(params),
    )
    if args.eckart_young or data.n <= AUTO_BOUND_MAX_N:
        ey = eckart_young_gap(data, params)
        manifest.update(recon_error=ey.recon_error, eckart_young_bound=ey.bound,
                        eckart_young_gap=ey.gap, eckart_young_relative=ey.relative)
    write_manifest(out / "manifest.txt", manifest)
    return EXIT_OK


def cmd_recover(args, argv) -> int:
    try:
        params = load_params(args.params)
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"missing weight file: {exc.filename}") from None
    data = _load(args)
    if data.n != params.n:
        raise DimensionError(f"params expect dimension {params.n}, data has {data.n}")
    model = estimate_variances(recover_loading_vectors(params, args.source), data)
    other = estimate_variances(recover_loading_vectors(params, "w1" if args.source == "w2" else "w2"), data)
    cross = principal_angles(model.loading_vectors, other.loading_vectors)
    column_cross = [
        float(principal_angles(model.loading_vectors[:, [j]], other.loading_vectors[:, [j]])[0])
        for j in range(model.m)
    ]
    out = _out_dir(args.out)
    save_model(model, out)
    manifest = _base_manifest(args, argv)
    manifest.update(
        provenance=model.provenance,
        degenerate=model.degenerate,
        singular_values=model.singular_values,
        variances=model.variances,
        cross_source_max_angle_deg=float(np.max(cross)),
        cross_source_column_angles_deg=column_cross,
    )
    if args.render:
        _render(model.loading_vectors, data, args, out / "loadings.pgm", manifest)
        _render(params.w2, data, args, out / "raw_w2.pgm", manifest)
    write_manifest(out / "manifest.txt", manifest)
    return EXIT_OK


def cmd_oracle(args, argv) -> int:
    data = _load(args)
    if data.n > ORACLE_MAX_N:
        raise UsageError(f"oracle PCA refuses n = {data.n} > {ORACLE_MAX_N}: the scatter matrix would be formed explicitly")
    if not 1 <= args.m <= data.n:
        raise UsageError(f"--m must satisfy 1 <= m <= n = {data.n}")
    model = oracle_pca(data, args.m)
    out = _out_dir(args.out)
    save_model(model, out)
    manifest = _base_manifest(args, argv)
    manifest.update(degenerate=model.degenerate, variances=model.variances)
    if args.render:
        _render(model.loading_vectors, data, args, out / "loadings.pgm", manifest)
    write_manifest(out / "manifest.txt", manifest)
    return EXIT_OK


def cmd_report(args, argv) -> int:
    data = _load(args)
    model = load_model(args.model)
    params = load_params(args.params) if args.params else None
    reference = load_model(args.reference) if args.reference else None
    if args.no_svd and params is None:
        raise UsageError("--no-svd needs --params")
    if model.mean is None:
        model = estimate_variances(model, data)
    report = diagnose(model, data, params=params, reference=reference, no_svd=args.no_svd)
    out = _out_dir(args.out)
    report.write(out / "report.txt", out / "covariance.csv")
    manifest = _base_manifest(args, argv)
    manifest.update(provenance=model.provenance)
    write_manifest(out / "manifest.txt", manifest)
    return EXIT_OK


def cmd_render(args, argv) -> int:
    vectors = read_matrix(args.matrix)
    if args.columns:
        vectors = vectors[:, : args.columns]
    out = Path(args.out)
    if os.environ.get(OUTPUT_ROOT_ENV) and not out.is_absolute():
        out = Path(os.environ[OUTPUT_ROOT_ENV]) / out
    out.parent.mkdir(parents=True, exist_ok=True)
    write_pgm_grid(vectors, args.image_shape, args.grid_cols, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    defaults = TrainConfig()
    parser = argparse.ArgumentParser(prog="aepca", description="PCA loading vectors from linear autoencoder weights")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate planted-spectrum Gaussian data")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--stds", type=_floats, required=True, help="comma-separated, descending; trailing zeros allowed")
    p.add_argument("--mean-norm", type=float, default=0.0, help="norm of the planted mean (random direction)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the linear autoencoder")
    _data_args(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--lr", type=float, default=defaults.learning_rate)
    p.add_argument("--wd", type=float, default=defaults.weight_decay)
    p.add_argument("--batch-size", type=int, default=defaults.batch_size)
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--init-scale", type=float, default=defaults.init_scale)
    p.add_argument("--tail-average", type=float, default=defaults.tail_average)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--eckart-young", action="store_true",
                   help=f"record the Eckart-Young gap even when n > {AUTO_BOUND_MAX_N}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recover", help="loading vectors from trained weights")
    _data_args(p)
    p.add_argument("--params", required=True, help="directory written by train (params/)")
    p.add_argument("--source", choices=("w1", "w2"), default="w2")
    p.add_argument("--render", action="store_true")
    p.add_argument("--grid-cols", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("oracle", help="reference PCA by eigendecomposition")
    _data_args(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--render", action="store_true")
    p.add_argument("--grid-cols", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="diagnostics for a model on a dataset")
    _data_args(p)
    p.add_argument("--model", required=True, help="model directory from recover or oracle")
    p.add_argument("--params", help="weights directory, enables the pseudoinverse residual")
    p.add_argument("--reference", help="second model directory for principal angles")
    p.add_argument("--no-svd", action="store_true", help="use raw W2^T scores instead of the model")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("render", help="tile the columns of a PCAE matrix into a PGM")
    p.add_argument("--matrix", required=True)
    p.add_argument("--image-shape", type=_shape, required=True)
    p.add_argument("--grid-cols", type=int, default=4)
    p.add_argument("--columns", type=int, help="render only the first COLUMNS columns")
    p.add_argument("--out", required=True, help="output .pgm path")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"aepca {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"aepca {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RankDeficiencyError, NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"aepca {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DimensionError, ValueError) as exc:
        print(f"aepca {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
