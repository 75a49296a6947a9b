"""Command-line entry point: ``qising {generate,analyze,correlate,derive,report}``.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import analysis
from .lattice import METRICS, build_lattice
from .sampler import (
    BOND_MODES,
    SCHEMA_VERSION,
    DatasetFormatError,
    SweepConfig,
    h_grid,
    read_correlations,
    read_dataset,
    read_manifest,
    run_sweep,
    write_correlations,
    write_dataset,
    write_manifest,
)
from .states import STATE_MODES

log = logging.getLogger("qising")

DATASET = "dataset.csv"
CORRELATIONS = "correlations.csv"
MANIFEST = "manifest.txt"
PLOTS = "plots"


class RunError(Exception):
    """Runtime failure reported with exit code 1."""


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qising", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run a field sweep and write dataset, correlations and manifest")
    g.add_argument("--rows", type=_positive_int, required=True)
    g.add_argument("--cols", type=_positive_int, required=True)
    g.add_argument("--j", type=float, default=1.0, dest="coupling_J")
    g.add_argument("--h-min", type=float, default=1.0)
    g.add_argument("--h-max", type=float, default=5.0)
    g.add_argument("--h-step", type=float, default=0.25)
    g.add_argument("--samples", type=_positive_int, default=5000)
    g.add_argument("--seed", type=_seed, required=True)
    g.add_argument("--out-dir", type=Path, required=True)
    g.add_argument("--state-mode", choices=STATE_MODES, default="haar")
    g.add_argument("--bond-mode", choices=BOND_MODES, default="honored")
    g.add_argument("--distance-metric", choices=METRICS, default="linear")
    g.add_argument("--no-correlators", action="store_true")
    g.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)

    a = sub.add_parser("analyze", help="summary statistics, histograms and plot data")
    a.add_argument("--input", type=Path, required=True, help="dataset.csv or a run directory")
    a.add_argument("--bins", type=_positive_int, default=analysis.DEFAULT_BINS)
    a.add_argument("--out-dir", type=Path)

    c = sub.add_parser("correlate", help="distance-resolved correlation table")
    c.add_argument("--input", type=Path, required=True, help="correlations.csv or a run directory")
    c.add_argument("--out-dir", type=Path)

    d = sub.add_parser("derive", help="first or second field derivative of mean energy")
    d.add_argument("--input", type=Path, required=True, help="dataset.csv or a run directory")
    d.add_argument("--order", type=int, choices=(1, 2), required=True)
    d.add_argument("--per-sample", action="store_true")
    d.add_argument("--out-dir", type=Path)

    r = sub.add_parser("report", help="cross-system tables from several run directories")
    r.add_argument("runs", type=Path, nargs="+")
    r.add_argument("--out-dir", type=Path, default=Path("report"))
    return p


def _resolve(path: Path, default_name: str) -> Path:
    return path / default_name if path.is_dir() else path


def _default_out(args, input_file: Path) -> Path:
    out = args.out_dir if args.out_dir is not None else input_file.parent / PLOTS
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(path: Path):
    ds = read_dataset(path)
    if len(ds) == 0:
        raise RunError(f"{path}: empty dataset")
    return ds


def cmd_generate(args) -> int:
    if args.h_step <= 0:
        raise argparse.ArgumentTypeError("--h-step must be positive")
    if args.h_max < args.h_min:
        raise argparse.ArgumentTypeError("--h-max must be >= --h-min")
    if args.rows * args.cols < 2 or (args.rows * args.cols) % 2:
        raise argparse.ArgumentTypeError("--rows x --cols must be an even number of sites >= 2")
    config = SweepConfig(
        lattice=build_lattice(args.rows, args.cols),
        master_seed=args.seed,
        coupling_J=args.coupling_J,
        h_values=h_grid(args.h_min, args.h_max, args.h_step),
        samples_per_h=args.samples,
        bond_multiplicity_mode=args.bond_mode,
        state_mode=args.state_mode,
        record_correlators=not args.no_correlators,
        distance_metric=args.distance_metric,
    )
    t0 = time.perf_counter()
    dataset, acc = run_sweep(config, threads=args.threads)
    elapsed = time.perf_counter() - t0
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(dataset, out / DATASET)
    if acc is not None:
        write_correlations(acc, out / CORRELATIONS)
    write_manifest(config, {"n_records": len(dataset), "duration_seconds": f"{elapsed:.3f}"},
                   out / MANIFEST)
    print(f"wrote {len(dataset)} records to {out / DATASET} in {elapsed:.2f}s")
    return 0


def cmd_analyze(args) -> int:
    src = _resolve(args.input, DATASET)
    ds = _load_dataset(src)
    out = _default_out(args, src)
    corr_path = src.parent / CORRELATIONS
    acc = read_correlations(corr_path) if corr_path.exists() else None
    written = analysis.emit_plot_data(ds, out, accumulator=acc, bins=args.bins)
    print(f"wrote {len(written)} files to {out}")
    return 0


def cmd_correlate(args) -> int:
    src = _resolve(args.input, CORRELATIONS)
    acc = read_correlations(src)
    table = analysis.correlation_table(acc)
    out = _default_out(args, src)
    analysis.write_correlation_table(table, out)
    for d, c, r in zip(table.distances, table.connected, table.raw):
        print(f"{int(d):>4d}  {c: .6f}  {r: .6f}")
    return 0


def cmd_derive(args) -> int:
    src = _resolve(args.input, DATASET)
    ds = _load_dataset(src)
    out = _default_out(args, src)
    name = analysis._DERIV_NAMES[args.order]
    table = analysis.summarize(ds)
    series = analysis.finite_difference(table.series("energy"), args.order)
    analysis.write_derivative(series, out / f"{name}_vs_h.csv")
    if args.per_sample:
        per = analysis.paired_sample_derivative(ds, args.order)
        analysis.write_per_sample_derivative(per, out / f"{name}_per_sample.csv")
    print(f"wrote order-{args.order} derivative over {len(series.h)} field values to {out}")
    return 0


def _correlation_report_rows(tables):
    max_d = max(int(t.distances.max()) for t in tables)
    for d in range(1, max_d + 1):
        row = [d]
        for t in tables:
            hit = [k for k, dd in enumerate(t.distances) if dd == d]
            row.append(float(t.connected[hit[0]]) if hit else "-")
        yield row


def cmd_report(args) -> int:
    datasets, tables, versions = [], [], set()
    for run in args.runs:
        if not run.is_dir():
            raise RunError(f"{run}: not a run directory")
        _, items = read_manifest(run / MANIFEST)
        versions.add(items.get("schema_version"))
        datasets.append(_load_dataset(run / DATASET))
        if (run / CORRELATIONS).exists():
            tables.append(analysis.correlation_table(read_correlations(run / CORRELATIONS)))
    if len(versions) > 1 or versions != {SCHEMA_VERSION}:
        raise RunError(f"mismatched schema versions {sorted(map(str, versions))}")
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    analysis.write_csv(
        out / "energy_variance_vs_n.csv",
        ("n_spins", "energy_variance", "pooled_energy_variance"),
        analysis.energy_variance_vs_n(datasets),
    )
    if tables:
        tables.sort(key=lambda t: t.n_sites)
        header = ["distance"] + [f"{t.n_sites}_spins_correlation" for t in tables]
        rows = list(_correlation_report_rows(tables))
        analysis.write_csv(out / "correlation_report.csv", header, rows)
        print(" | ".join(header))
        for row in rows:
            print(" | ".join(c if isinstance(c, str) else f"{float(c):.6f}" if i else str(c)
                             for i, c in enumerate(row)))
    print(f"report for {len(datasets)} runs written to {out}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "analyze": cmd_analyze,
    "correlate": cmd_correlate,
    "derive": cmd_derive,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except argparse.ArgumentTypeError as e:
        parser.error(str(e))
    except (RunError, DatasetFormatError, analysis.AnalysisError, OSError, ValueError) as e:
        print(f"qising {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
