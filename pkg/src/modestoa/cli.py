"""Batch command-line front end.

Pipeline: `synth` makes a two-receiver IQ trace from a scenario file,
`decode` turns a trace into packet records, `estimate` runs TOA methods
over a trace, `evaluate` pairs two TOA files and emits Table-style report
CSVs, and `report` pretty-prints a report table.

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
All randomness derives from the single --seed value.
"""

from __future__ import annotations

import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .dataio import RawTrace, read_jsonl, write_csv, write_jsonl
from .evaluate import distribution_stats, evaluate_method
from .receiver import detect_and_decode
from .scenario import ScenarioError, load_scenario
from .synth import generate_two_receiver_trace
from .toa import ALL_METHODS, ToaRecord, make_estimator, run_estimators

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_DATA = 3


class DataError(click.ClickException):
    exit_code = EXIT_DATA


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for every random draw in the pipeline.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker processes for the estimation stage.")
@click.option("--verbose", "-v", count=True, help="-v for info, -vv for debug.")
@click.pass_context
def main(ctx, seed: int, threads: int, verbose: int):
    """Nanosecond-precision TOA estimation for Mode S / ADS-B IQ traces."""
    _setup_logging(verbose)
    ctx.obj = {"seed": seed, "threads": max(1, threads)}


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the global seed.")
@click.option("--out-rx1", required=True, type=click.Path())
@click.option("--out-rx2", required=True, type=click.Path())
@click.option("--truth", "truth_path", required=True, type=click.Path())
@click.pass_context
def synth(ctx, scenario_path, seed, out_rx1, out_rx2, truth_path):
    """Synthesize a two-receiver IQ trace plus ground truth."""
    try:
        scenario = load_scenario(scenario_path)
    except ScenarioError as exc:
        raise click.UsageError(f"{scenario_path}: {exc}")
    seed = ctx.obj["seed"] if seed is None else seed
    try:
        rx1, rx2, truth = generate_two_receiver_trace(scenario, seed)
    except ValueError as exc:
        raise click.UsageError(f"{scenario_path}: {exc}")
    rx1.write(out_rx1)
    rx2.write(out_rx2)
    write_jsonl(truth_path, (t.to_record() for t in truth))
    click.echo(f"wrote {len(truth)} packets: {out_rx1}, {out_rx2}, {truth_path}")


def _load_trace(iq_path, meta_path):
    try:
        return RawTrace.read(iq_path, meta_path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read trace {iq_path}: {exc}")


@main.command()
@click.option("--iq", "iq_path", required=True, type=click.Path(exists=True))
@click.option("--meta", "meta_path", type=click.Path(exists=True), default=None,
              help="Sidecar metadata (default: <iq>.meta.json).")
@click.option("--receiver-id", default=None, help="Override the sidecar receiver id.")
@click.option("--threshold", type=float, default=0.75, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def decode(iq_path, meta_path, receiver_id, threshold, out_path):
    """Detect and decode packets; write JSON Lines packet records."""
    trace = _load_trace(iq_path, meta_path)
    packets = detect_and_decode(trace, threshold=threshold, receiver_id=receiver_id)
    write_jsonl(out_path, (
        {
            "receiver_id": p.receiver_id,
            "leading_sample_index": p.leading_sample_index,
            "payload_hex": p.payload.hex,
            "coarse_timestamp_s": p.coarse_timestamp,
        }
        for p in packets
    ))
    click.echo(f"decoded {len(packets)} packets -> {out_path}")


def _parse_methods(methods: str) -> list[str]:
    names = [m.strip() for m in methods.split(",") if m.strip()]
    bad = [m for m in names if m not in ALL_METHODS]
    if bad:
        raise click.UsageError(
            f"unknown method(s) {', '.join(bad)}; valid names: {', '.join(ALL_METHODS)}")
    if not names:
        raise click.UsageError(f"no methods given; valid names: {', '.join(ALL_METHODS)}")
    return names


def _estimate_slice(args):
    packets, specs = args
    estimators = [make_estimator(m, n) for m, n in specs]
    return run_estimators(packets, estimators)


@main.command()
@click.option("--iq", "iq_path", required=True, type=click.Path(exists=True))
@click.option("--meta", "meta_path", type=click.Path(exists=True), default=None)
@click.option("--methods", default="CorrPulseS", show_default=True,
              help="Comma-separated method names (see --help-methods).")
@click.option("--n", "factor", type=int, default=25, show_default=True,
              help="Upsampling factor for the N-parameterized methods.")
@click.option("--receiver-id", default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def estimate(ctx, iq_path, meta_path, methods, factor, receiver_id, out_path):
    """Estimate per-packet TOA with the selected methods; write JSON Lines."""
    if factor < 1 or factor > 128:
        raise click.UsageError("--n must be an integer in [1, 128]")
    names = _parse_methods(methods)
    trace = _load_trace(iq_path, meta_path)
    packets = detect_and_decode(trace, receiver_id=receiver_id)
    specs = [(m, factor) for m in names]
    threads = ctx.obj["threads"]
    if threads > 1 and len(packets) > 64:
        bounds = [round(i * len(packets) / threads) for i in range(threads + 1)]
        slices = [packets[bounds[i] : bounds[i + 1]] for i in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_estimate_slice, [(s, specs) for s in slices]))
        records = []
        for part, offset in zip(parts, bounds[:-1]):
            for r in part:
                records.append(ToaRecord(**{**r.__dict__, "packet_index": r.packet_index + offset}))
    else:
        estimators = [make_estimator(m, factor) for m in names]
        records = run_estimators(packets, estimators)
    write_jsonl(out_path, (r.to_record() for r in records))
    click.echo(f"{len(packets)} packets x {len(names)} methods -> {out_path}")


def _read_toa(path) -> list[ToaRecord]:
    try:
        return [ToaRecord.from_record(rec) for rec in read_jsonl(path)]
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read TOA records from {path}: {exc}")


@main.command()
@click.option("--toa-rx1", required=True, type=click.Path(exists=True))
@click.option("--toa-rx2", required=True, type=click.Path(exists=True))
@click.option("--out-prefix", required=True)
@click.option("--max-order", type=int, default=5, show_default=True,
              help="Maximum clock-polynomial order.")
def evaluate(toa_rx1, toa_rx2, out_prefix, max_order):
    """Pair TOA files, remove clock drift, and write report CSVs."""
    rec1 = _read_toa(toa_rx1)
    rec2 = _read_toa(toa_rx2)
    groups1 = {(r.method, r.n) for r in rec1}
    groups2 = {(r.method, r.n) for r in rec2}
    if groups1 != groups2:
        only1 = sorted(f"{m}@N{n}" for m, n in groups1 - groups2)
        only2 = sorted(f"{m}@N{n}" for m, n in groups2 - groups1)
        raise DataError("method sets differ between receivers: "
                        f"only rx1 has [{', '.join(only1)}]; only rx2 has [{', '.join(only2)}]")
    if not groups1:
        raise DataError("no TOA records to evaluate")

    table_rows = []
    ecdf_rows = []
    qq_rows = []
    for method, n in sorted(groups1):
        try:
            report = evaluate_method(rec1, rec2, method, n, max_order=max_order)
        except ValueError as exc:
            raise DataError(f"{method}@N{n}: {exc}")
        for row in report.rows:
            table_rows.append((row.method, row.n, row.klass, row.count,
                               f"{row.rmse_ns:.2f}", f"{row.sigma_ns:.2f}",
                               int(row.low_count)))
        for klass, resid in report.residuals.items():
            if len(resid) < 30:
                continue
            d = distribution_stats(resid)
            for x, p in zip(d.ecdf_x, d.ecdf_p):
                ecdf_rows.append((method, n, klass, f"{x * 1e9:.2f}", f"{p:.6f}"))
            for t, e in zip(d.qq_theoretical, d.qq_empirical):
                qq_rows.append((method, n, klass, f"{t * 1e9:.2f}", f"{e * 1e9:.2f}"))

    write_csv(f"{out_prefix}_table.csv",
              ["method", "N", "class", "count", "rmse_ns", "sigma_ns", "low_count"], table_rows)
    write_csv(f"{out_prefix}_ecdf.csv",
              ["method", "N", "class", "residual_ns", "ecdf"], ecdf_rows)
    write_csv(f"{out_prefix}_qq.csv",
              ["method", "N", "class", "theoretical_ns", "empirical_ns"], qq_rows)
    click.echo(f"wrote {out_prefix}_table.csv, {out_prefix}_ecdf.csv, {out_prefix}_qq.csv")


@main.command()
@click.option("--table", "table_path", required=True, type=click.Path(exists=True))
def report(table_path):
    """Pretty-print an evaluation table CSV."""
    lines = Path(table_path).read_text().strip().split("\n")
    rows = [line.split(",") for line in lines]
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    for i, row in enumerate(rows):
        click.echo("  ".join(f"{v:>{w}}" for v, w in zip(row, widths)))
        if i == 0:
            click.echo("  ".join("-" * w for w in widths))


if __name__ == "__main__":
    main()
