"""Command-line surface.

Subcommands: ``spectrum``, ``mask``, ``energy``, ``check``, ``train``.
Data exports are CSV (row-major, '.' decimal separator, 12 significant
digits) or a single JSON document; the report path also renders matching
PNG figures alongside the delimited output unless ``--no-figures`` is
given. Exit codes: 0 ok, 1 input error, 2 numerical failure, 3 invariant
failure, 4 divergence, 64 usage. Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, masks, spectral
from .attention import ModelConfig
from .graphs import (
    GraphParseError,
    detect_dataset_format,
    features_or_zeros,
    parse_dataset,
    read_graph_file,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_INVARIANT = 3
EXIT_DIVERGENCE = 4
EXIT_USAGE = 64

DEFAULT_HIDDEN = 8
DEFAULT_HEAD_DIM = 4
DEFAULT_HEADS = 2
DEFAULT_LAYERS = 2
DEFAULT_SYNTHETIC_COUNT = 24


class _Parser(argparse.ArgumentParser):
    """argparse with the documented usage exit code."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sig(value: float) -> str:
    return f"{value:.12g}"


def _write_csv_rows(path: Path, rows: list[list[float]]) -> None:
    text = "\n".join(",".join(_sig(v) for v in row) for row in rows)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def write_matrix_csv(path: Path, matrix: np.ndarray) -> None:
    _write_csv_rows(path, [[float(v) for v in row] for row in np.atleast_2d(matrix)])


def write_vector_csv(path: Path, vector: np.ndarray) -> None:
    _write_csv_rows(path, [[float(v) for v in vector]])


def _json_matrix(matrix: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(matrix)]


def _out_dir(raw: str) -> Path:
    out = Path(raw)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(path: Path) -> None:
    print(path)


def _cmd_spectrum(args: argparse.Namespace) -> int:
    g = read_graph_file(args.graph)
    lap = spectral.normalized_laplacian(g)
    dec = spectral.eig_sym(lap)
    out = _out_dir(args.out)
    if args.format == "csv":
        write_vector_csv(out / "eigenvalues.csv", dec.eigenvalues)
        write_matrix_csv(out / "eigenvectors.csv", dec.eigenvectors)
        write_matrix_csv(out / "laplacian.csv", lap)
        for name in ("eigenvalues.csv", "eigenvectors.csv", "laplacian.csv"):
            _emit(out / name)
    else:
        doc = {
            "eigenvalues": [float(v) for v in dec.eigenvalues],
            "eigenvectors": _json_matrix(dec.eigenvectors),
            "laplacian": _json_matrix(lap),
        }
        (out / "spectrum.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        _emit(out / "spectrum.json")
    if args.figures:
        from . import figures

        _emit(figures.spectrum_figure(dec.eigenvalues, out / "spectrum.png"))
    return EXIT_OK


def _cmd_mask(args: argparse.Namespace) -> int:
    g = read_graph_file(args.graph)
    if args.mode == "full" and g.features is None:
        raise GraphParseError(
            f"{args.graph} has no #features block; mode 'full' needs node "
            "features (use --mode structure-only or --mode none)"
        )
    bundle = masks.structure_frequency_mask(g, g.features, args.mode)
    out = _out_dir(args.out)
    if args.format == "csv":
        write_matrix_csv(out / "S.csv", bundle.structure)
        write_matrix_csv(out / "F.csv", bundle.filter)
        write_matrix_csv(out / "M.csv", bundle.mask)
        for name in ("S.csv", "F.csv", "M.csv"):
            _emit(out / name)
    else:
        doc = {
            "S": _json_matrix(bundle.structure),
            "F": _json_matrix(bundle.filter),
            "M": _json_matrix(bundle.mask),
        }
        (out / "mask.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        _emit(out / "mask.json")
    if args.figures:
        from . import figures

        _emit(figures.mask_heatmaps(bundle.structure, bundle.filter, bundle.mask, out / "mask_matrices.png"))
    return EXIT_OK


def _cmd_energy(args: argparse.Namespace) -> int:
    ds = parse_dataset(args.dataset, detect_dataset_format(args.dataset))
    rows: list[list[float]] = []
    all_low: list[np.ndarray] = []
    all_high: list[np.ndarray] = []
    for gid, g in enumerate(ds.graphs):
        x = features_or_zeros(g)
        dec = spectral.decompose(g)
        fm = masks.frequency_masks(dec.eigenvalues)
        ep = masks.energy_profile(*masks.band_features(dec, x, fm))
        all_low.append(ep.e_low)
        all_high.append(ep.e_high)
        for node in range(g.n):
            rows.append([float(gid), float(node), float(ep.e_low[node]), float(ep.e_high[node])])
    out = _out_dir(args.out)
    path = out / "energies.csv"
    header = "graph,node,e_low,e_high"
    body = "\n".join(
        f"{int(r[0])},{int(r[1])},{_sig(r[2])},{_sig(r[3])}" for r in rows
    )
    path.write_text(header + ("\n" + body if body else "") + "\n", encoding="utf-8", newline="\n")
    _emit(path)
    if args.figures:
        from . import figures

        _emit(
            figures.energy_density_figure(
                np.concatenate(all_low), np.concatenate(all_high), out / "energy_density.png"
            )
        )
    return EXIT_OK


def _cmd_check(args: argparse.Namespace) -> int:
    if args.trials < 1:
        print(f"sfgt check: error: --trials must be >= 1, got {args.trials}", file=sys.stderr)
        return EXIT_USAGE
    report = harness.invariant_suite(seed=args.seed, trials=args.trials)
    sys.stdout.write(report.text())
    return EXIT_OK if report.all_passed else EXIT_INVARIANT


def _cmd_train(args: argparse.Namespace) -> int:
    if args.synthetic is not None:
        ds = harness.gen_synthetic(args.synthetic, count=DEFAULT_SYNTHETIC_COUNT, seed=args.seed)
    else:
        ds = parse_dataset(args.dataset, detect_dataset_format(args.dataset))
    feature_dim = ds.feature_dim if ds.feature_dim is not None else 1
    mcfg = ModelConfig(
        feature_dim=feature_dim,
        hidden_dim=DEFAULT_HIDDEN,
        head_dim=DEFAULT_HEAD_DIM,
        heads=DEFAULT_HEADS,
        layers=DEFAULT_LAYERS,
        num_classes=max(ds.num_classes, 2),
        mask_mode=args.mask_mode,
        seed=args.seed,
    )
    cfg = harness.TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        fraction=args.fraction,
        seed=args.seed,
        mask_mode=args.mask_mode,
    )
    report = harness.train(ds, cfg, mcfg)
    out = _out_dir(args.out)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    _emit(out / "report.json")

    def fmt(acc: float | None) -> str:
        return "n/a" if acc is None else _sig(acc)

    print(
        f"train_accuracy={fmt(report.train_accuracy)} "
        f"val_accuracy={fmt(report.val_accuracy)} "
        f"test_accuracy={fmt(report.test_accuracy)}"
    )
    if args.figures:
        from . import figures

        _emit(figures.loss_curve_figure(report.losses, out / "training_loss.png"))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="sfgt", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_figures_flag(p: _Parser) -> None:
        p.add_argument(
            "--no-figures", dest="figures", action="store_false",
            help="skip rendering PNG figures next to the data files",
        )

    p = sub.add_parser("spectrum", parents=[], help="export Laplacian, eigenvalues, eigenvectors")
    p.add_argument("--graph", required=True, help="edge-list graph file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    add_figures_flag(p)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("mask", help="export the S, F, M mask matrices")
    p.add_argument("--graph", required=True, help="edge-list graph file")
    p.add_argument("--mode", choices=masks.MASK_MODES, default="full")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    add_figures_flag(p)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("energy", help="export per-node band energies of a dataset")
    p.add_argument("--dataset", required=True, help="dataset directory (tu-batch or edge-list-dir)")
    p.add_argument("--out", required=True, help="output directory")
    add_figures_flag(p)
    p.set_defaults(func=_cmd_energy)

    p = sub.add_parser("check", help="run the invariant suite")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("train", help="train the toy classifier and write a run report")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--dataset", help="dataset directory (tu-batch or edge-list-dir)")
    source.add_argument("--synthetic", choices=harness.SYNTHETIC_KINDS, help="generate a synthetic dataset")
    p.add_argument("--fraction", type=float, default=1.0, help="train-split fraction in (0, 1]")
    p.add_argument("--mask-mode", choices=masks.MASK_MODES, default="full")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--out", required=True, help="output directory")
    add_figures_flag(p)
    p.set_defaults(func=_cmd_train)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except GraphParseError as exc:
        print(f"sfgt: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"sfgt: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except spectral.NumericalError as exc:
        print(f"sfgt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except harness.DivergenceError as exc:
        print(f"sfgt: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ValueError as exc:
        print(f"sfgt: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"sfgt: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
