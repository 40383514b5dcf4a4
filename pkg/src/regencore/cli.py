"""Command-line front end: ``regencore <verb> [options]``.

Store-backed verbs (encode, fail, recover, read, info) use ``--store``, then
``$REGENCORE_STORE``, then ``./regencore-store``.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import re
import sys
from pathlib import Path

from regencore import analysis
from regencore.cluster import Cluster, TrafficLedger, default_block_size
from regencore.codes import CodeConstructionError, CodeParameterError, build_code
from regencore.recovery import BadPatternError, EscalationError, UnrecoverableError

STORE_ENV = "REGENCORE_STORE"
DEFAULT_STORE = "regencore-store"

_BYTE_UNITS = {"": 1, "b": 1, "kb": 10**3, "mb": 10**6, "gb": 10**9, "tb": 10**12,
               "kib": 2**10, "mib": 2**20, "gib": 2**30, "tib": 2**40}
_BIT_UNITS = {"bps": 1, "kbps": 10**3, "mbps": 10**6, "gbps": 10**9, "tbps": 10**12}


class UsageError(Exception):
    pass


def parse_quantity(text: str, rate: bool = False) -> float:
    """Parse ``"1TB"``, ``"1Gbps"``, ``"125MB/s"`` or a plain number of bytes."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)(/s)?\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2).lower()
    if rate and unit in _BIT_UNITS:
        return value * _BIT_UNITS[unit] / 8
    if unit in _BYTE_UNITS:
        return value * _BYTE_UNITS[unit]
    raise argparse.ArgumentTypeError(f"unknown unit {m.group(2)!r} in {text!r}")


def _node_list(text: str) -> list[int]:
    try:
        nodes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated node ids, got {text!r}") from None
    if not nodes:
        raise argparse.ArgumentTypeError("no node ids given")
    return nodes


def _store(args) -> Path:
    return Path(args.store or os.environ.get(STORE_ENV) or DEFAULT_STORE)


def _table_text(table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([analysis.format_cell(v) for v in row])
    return buf.getvalue()


def _ledger_summary(ledger: TrafficLedger) -> str:
    return (f"stripes: {ledger.stripes}\n"
            + "".join(f"{f}: {ledger.total(f)} bytes\n" for f in
                      ("bytes_read", "bytes_encoded", "bytes_downloaded",
                       "bytes_reconstructed", "bytes_uploaded")))


def cmd_encode(args, out):
    spec = build_code(args.n, args.k, args.code, args.symbol_size)
    block_size = args.block_size or default_block_size(spec)
    cluster = Cluster(spec, block_size)
    src = Path(args.input)
    if not src.exists():
        raise UsageError(f"input file {src} does not exist")
    root = _store(args)
    if (root / "metadata.json").exists() and not args.force:
        raise UsageError(f"store {root} already exists; pass --force to overwrite")
    ids = cluster.stripe_file(src.read_bytes())
    cluster.save(root)
    f = cluster.files[-1]
    out.write(f"stored {f['size']} bytes as {len(ids)} blocks in {cluster.groups} groups "
              f"({cluster.stripe_count} stripes, {f['padding']} bytes padding) at {root}\n")


def cmd_fail(args, out):
    root = _store(args)
    cluster = Cluster.load(root)
    cluster.fail_nodes(args.nodes)
    cluster.save(root)
    out.write(f"failed nodes: {sorted(cluster.failed)}\n")


def cmd_recover(args, out):
    root = _store(args)
    cluster = Cluster.load(root)
    if not cluster.failed:
        out.write("no failed nodes; nothing to recover\n")
        ledger = TrafficLedger(cluster.spec.n)
    else:
        failed = sorted(cluster.failed)
        ledger = cluster.run_recovery(args.scheme, workers=args.workers)
        cluster.save(root)
        out.write(f"recovered nodes {failed} with scheme {args.scheme}\n")
    out.write(_ledger_summary(ledger))
    if args.report:
        analysis.emit_csv(ledger, args.report)


def cmd_read(args, out):
    cluster = Cluster.load(_store(args))
    if args.block is None:
        data, ledger = cluster.read_file(args.file, args.scheme)
    else:
        try:
            data, ledger = cluster.read_block(args.block, args.scheme)
        except KeyError:
            raise UsageError(f"no block {args.block}; valid ids are 0..{len(cluster.blocks()) - 1}") from None
    if args.out:
        Path(args.out).write_bytes(data)
        out.write(f"wrote {len(data)} bytes to {args.out}\n")
        out.write(_ledger_summary(ledger))
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        sys.stderr.write(_ledger_summary(ledger))
    if args.report:
        analysis.emit_csv(ledger, args.report)


def cmd_census(args, out):
    spec = build_code(args.n, args.k, "msr")
    ts = [args.t] if args.t else list(range(1, args.n - args.k + 1))
    reports = [analysis.census(spec, t, budget=args.budget, sample=args.sample, seed=args.seed)
               for t in ts]
    table = analysis.census_table(reports)
    out.write(_table_text(table))
    if any(r.sampled for r in reports):
        out.write("# sampled estimate, not an exhaustive enumeration\n")
    if args.csv:
        analysis.emit_csv(table, args.csv)


def cmd_ratios(args, out):
    table = analysis.bandwidth_ratio_table(args.n, args.k)
    out.write(_table_text(table))
    if args.csv:
        analysis.emit_csv(table, args.csv)


def cmd_mttf(args, out):
    if args.sweep:
        if not args.values:
            raise UsageError("--sweep needs --values")
        values = [parse_quantity(v, rate=args.sweep == "bandwidth") if args.sweep != "lambda"
                  else float(v) for v in args.values.split(",")]
        table = analysis.mttf_sweep(args.n, args.k, args.sweep, values, lam=args.lam,
                                    B=args.bandwidth, S=args.capacity)
        out.write(_table_text(table))
        if args.csv:
            analysis.emit_csv(table, args.csv)
        return
    schemes = ["core", "conventional"] if args.scheme == "both" else [args.scheme]
    results = {}
    for scheme in schemes:
        params = analysis.MarkovParams(args.n, args.k, args.lam, args.bandwidth, args.capacity, scheme)
        results[scheme] = analysis.mttf(params)
        out.write(f"{scheme}: MTTF = {results[scheme]:.6e} years\n")
        if args.trials:
            mean, err = analysis.mttf_monte_carlo(params, args.trials, args.seed)
            out.write(f"{scheme}: Monte Carlo MTTF = {mean:.6e} +/- {err:.2e} years "
                      f"({args.trials} trials, seed {args.seed})\n")
    if len(results) == 2:
        out.write(f"ratio core/conventional: {results['core'] / results['conventional']:.4f}\n")


def cmd_info(args, out):
    root = _store(args)
    if args.n and args.k:
        out.write(build_code(args.n, args.k, args.code, args.symbol_size).to_text())
        return
    cluster = Cluster.load(root)
    spec = cluster.spec
    out.write(f"store: {root}\n"
              f"code: {spec.kind.value} (n={spec.n}, k={spec.k}, r={spec.r}, "
              f"symbol_size={spec.symbol_size} bytes)\n"
              f"block size: {cluster.block_size} bytes ({cluster.stripes_per_block} stripes)\n"
              f"groups: {cluster.groups}, stripes: {cluster.stripe_count}\n"
              f"failed nodes: {sorted(cluster.failed)}\n")
    for b in cluster.blocks():
        state = "lost" if b.node in cluster.failed else "ok"
        out.write(f"block {b.id}: group {b.group} {b.role} on node {b.node} [{state}]\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regencore", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    def store_opt(sp):
        sp.add_argument("--store", help=f"store directory (default ${STORE_ENV} or ./{DEFAULT_STORE})")

    sp = sub.add_parser("encode", help="stripe a file into a new store")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--code", choices=["rs", "msr"], default="msr")
    sp.add_argument("--symbol-size", type=int, default=8192, help="bytes per symbol")
    sp.add_argument("--block-size", type=int, help="bytes per block (default: 64 MiB rounded to strips)")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--force", action="store_true")
    store_opt(sp)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("fail", help="mark nodes as failed and drop their strips")
    sp.add_argument("--nodes", type=_node_list, required=True)
    store_opt(sp)
    sp.set_defaults(func=cmd_fail)

    sp = sub.add_parser("recover", help="rebuild all failed nodes")
    sp.add_argument("--scheme", choices=["core", "conventional"], default="core")
    sp.add_argument("--report", help="write the traffic ledger CSV here")
    sp.add_argument("--workers", type=int, default=0, help="pipeline worker threads (0 = sequential)")
    store_opt(sp)
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("read", help="read a block (or the whole file), degraded if needed")
    sp.add_argument("--block", type=int)
    sp.add_argument("--file", type=int, default=0, help="file id when --block is omitted")
    sp.add_argument("--scheme", choices=["core", "conventional"], default="core")
    sp.add_argument("--out")
    sp.add_argument("--report")
    store_opt(sp)
    sp.set_defaults(func=cmd_read)

    sp = sub.add_parser("census", help="count bad failure patterns")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--t", type=int, help="failures (default: every t in 1..n-k)")
    sp.add_argument("--budget", type=int, default=analysis.DEFAULT_CENSUS_BUDGET)
    sp.add_argument("--sample", type=int, help="classify this many random patterns instead")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_census)

    sp = sub.add_parser("ratios", help="CORE/conventional bandwidth ratio per t")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_ratios)

    sp = sub.add_parser("mttf", help="mean time to data loss from the Markov model")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.25, help="node failures per year")
    sp.add_argument("--bandwidth", type=lambda s: parse_quantity(s, rate=True), default=1e9 / 8,
                    help="transfer rate, bytes/s or e.g. 1Gbps (default 1Gbps)")
    sp.add_argument("--capacity", type=parse_quantity, default=1e12,
                    help="node capacity, bytes or e.g. 1TB (default 1TB)")
    sp.add_argument("--scheme", choices=["core", "conventional", "both"], default="both")
    sp.add_argument("--trials", type=int, default=0, help="also run a Monte Carlo check")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sweep", choices=["bandwidth", "lambda", "capacity"])
    sp.add_argument("--values", help="comma-separated sweep values")
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_mttf)

    sp = sub.add_parser("info", help="describe a store, or print a code document with --n/--k")
    sp.add_argument("--n", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--code", choices=["rs", "msr"], default="msr")
    sp.add_argument("--symbol-size", type=int, default=8192)
    store_opt(sp)
    sp.set_defaults(func=cmd_info)
    return p


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, out)
    except (UsageError, CodeParameterError, CodeConstructionError, UnrecoverableError,
            BadPatternError, EscalationError, analysis.CensusBudgetError,
            FileNotFoundError, ValueError, OSError) as exc:
        sys.stderr.write(f"regencore {args.verb}: error: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())
