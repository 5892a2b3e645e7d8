"""Command-line entry points.

``swsig scenario`` runs a detection experiment and writes the report
artifacts (JSON, CSV, figure); ``swsig bench`` times the primitives.  The
remaining subcommands are operational helpers: key generation, standalone
servers, manifest emission, and conformance-vector tooling.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from . import vectors as vectors_mod
from .collector import CollectorServer, IncidentStore
from .crypto import SigningKey, TrustedKeySet
from .gateway import GatewayConfig, SigningGateway
from .harness import (
    DEFAULT_PATHS,
    ScenarioSpec,
    default_rate_grid,
    run_benchmark,
    run_scenario,
)
from .manifest import emit_manifest
from .mitm import TamperStrategy
from .origin import DemoOrigin
from .report import summary_table, write_report

logger = logging.getLogger(__name__)


def _parse_rates(text: str) -> tuple[float, ...]:
    """Percent list/range syntax: "1-100", "5", "1,10,50", "0".

    Values are percentages; fractions like "0.5" mean half a percent.
    """
    out: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo_text, hi_text = part.split("-", 1)
            lo, hi = int(lo_text), int(hi_text)
            if lo > hi:
                raise argparse.ArgumentTypeError(f"bad rate range {part!r}")
            out.extend(step / 100 for step in range(lo, hi + 1))
        else:
            out.append(float(part) / 100)
    if not out:
        raise argparse.ArgumentTypeError("no rates given")
    for rate in out:
        if not 0.0 <= rate <= 1.0:
            raise argparse.ArgumentTypeError("rates must lie within 0-100%")
    return tuple(out)


def _cmd_scenario(args: argparse.Namespace) -> int:
    strategies = tuple(TamperStrategy(s) for s in (args.strategy or ["body_mutation"]))
    if args.rates is not None:
        rates = args.rates
    elif args.scenario == "B":
        rates = default_rate_grid()
    else:
        rates = (1.0,)
    paths = DEFAULT_PATHS
    if TamperStrategy.WORKER_SWAP in strategies and "/sw.js" not in paths:
        paths = paths + ("/sw.js",)
    spec = ScenarioSpec(
        scenario=args.scenario,
        requests_per_rate=args.requests,
        rates=rates,
        strategies=strategies,
        seed=args.seed,
        parallelism=args.parallelism,
        paths=paths,
    )
    if args.scenario == "A":
        print(
            "note: scenario A is a negative control; the attacker owns first "
            "contact, so no detection is expected",
            file=sys.stderr,
        )

    def progress(tally) -> None:
        print(
            f"rate {tally.rate * 100:5.1f}%: {tally.requests} requests, "
            f"{tally.tampered} tampered, {tally.true_positives} detected, "
            f"FN={tally.false_negatives} FP={tally.false_positives}",
            file=sys.stderr,
        )

    result = run_scenario(spec, progress=progress if args.progress else None)
    benchmark = run_benchmark(args.bench_size, args.bench_iters) if args.bench else None
    print(summary_table(result, benchmark))
    if args.report:
        paths_out = write_report(result, args.report, benchmark=benchmark)
        for kind, path in sorted(paths_out.items()):
            print(f"{kind}: {path}")
    clean = result.total_false_negatives == 0 and result.total_false_positives == 0
    if args.scenario == "A":
        return 0  # negative control: misses are the documented expectation
    return 0 if clean else 1


def _cmd_bench(args: argparse.Namespace) -> int:
    result = run_benchmark(args.size, args.iters)
    print(
        f"body {result.body_size} B, {result.iterations} iterations:\n"
        f"  hash:   mean {result.hash_mean_ns / 1e3:9.2f} us   p99 {result.hash_p99_ns / 1e3:9.2f} us\n"
        f"  sign:   mean {result.sign_mean_ns / 1e3:9.2f} us   p99 {result.sign_p99_ns / 1e3:9.2f} us\n"
        f"  verify: mean {result.verify_mean_ns / 1e3:9.2f} us   p99 {result.verify_p99_ns / 1e3:9.2f} us"
    )
    if args.json:
        print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_keygen(args: argparse.Namespace) -> int:
    key = SigningKey.generate(args.key_id)
    Path(args.out).write_bytes(key.to_pem())
    if args.keyset_out:
        vectors_mod.save_keyset(args.keyset_out, TrustedKeySet.of(key.public_entry()))
        print(f"wrote {args.out} and {args.keyset_out}")
    else:
        print(f"wrote {args.out}")
    return 0


def _wait_forever() -> None:
    stop = threading.Event()
    for name in ("SIGINT", "SIGTERM"):
        signal.signal(getattr(signal, name), lambda *_: stop.set())
    stop.wait()


def _cmd_gateway(args: argparse.Namespace) -> int:
    config = GatewayConfig.from_file(args.config)
    with SigningGateway(config) as gateway:
        print(f"signing gateway on {gateway.host}:{gateway.port}", file=sys.stderr)
        _wait_forever()
    return 0


def _cmd_origin(args: argparse.Namespace) -> int:
    host, _, port = args.listen.rpartition(":")
    with DemoOrigin(host or "127.0.0.1", int(port), docroot=args.docroot) as origin:
        print(f"origin on {origin.host}:{origin.port}", file=sys.stderr)
        _wait_forever()
    return 0


def _cmd_collector(args: argparse.Namespace) -> int:
    host, _, port = args.listen.rpartition(":")
    store = IncidentStore(journal_path=args.journal)
    with CollectorServer(store, host or "127.0.0.1", int(port)) as collector:
        print(f"collector on {collector.host}:{collector.port}", file=sys.stderr)
        _wait_forever()
    return 0


def _cmd_manifest(args: argparse.Namespace) -> int:
    key = SigningKey.from_pem(args.key_id, Path(args.key_file).read_bytes())
    root = Path(args.root)
    files = sorted(p for p in root.rglob("*") if p.is_file())
    paths = ["/" + str(p.relative_to(root)) for p in files]
    bodies = {path: file.read_bytes() for path, file in zip(paths, files)}
    built = emit_manifest(paths, bodies.__getitem__, key=key, version=args.version)
    Path(args.out).write_text(built.to_json(), encoding="utf-8")
    print(f"wrote {args.out} ({len(paths)} entries, version {args.version})")
    return 0


def _cmd_vectors(args: argparse.Namespace) -> int:
    if args.check:
        keys = vectors_mod.load_keyset(args.keys)
        records = vectors_mod.read_vectors(args.out)
        bad = vectors_mod.mismatches(keys, records)
        if bad:
            for index, record, actual in bad:
                print(
                    f"line {index + 1}: expected {record.expected_outcome}, "
                    f"got {actual.value} ({record.comment})",
                    file=sys.stderr,
                )
            return 1
        print(f"{len(records)} vectors verified")
        return 0
    count = vectors_mod.write_standard_files(args.out, args.keys)
    print(f"wrote {count} vectors to {args.out}, key set to {args.keys}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swsig",
        description="Signed-response gateway, verifier, and detection experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    scenario = sub.add_parser("scenario", help="run a detection experiment")
    scenario.add_argument(
        "--scenario",
        choices=["A", "B", "C"],
        default="B",
        help="B: keys installed before load; C: tampering starts mid-run; "
        "A: negative control, attacker present from first contact",
    )
    scenario.add_argument(
        "--rates",
        type=_parse_rates,
        default=None,
        help='percent grid, e.g. "1-100", "5", "1,10,50" (default: 1-100 for B, 100 for C)',
    )
    scenario.add_argument("--requests", type=int, default=1000, help="requests per rate")
    scenario.add_argument(
        "--strategy",
        action="append",
        choices=[s.value for s in TamperStrategy],
        help="tamper strategy; repeat for a mixed pool (default body_mutation)",
    )
    scenario.add_argument("--seed", type=int, default=0)
    scenario.add_argument("--parallelism", type=int, default=8)
    scenario.add_argument("--report", help="base path for .json/.csv/.png artifacts")
    scenario.add_argument("--progress", action="store_true", help="per-rate progress lines")
    scenario.add_argument("--bench", action="store_true", help="append a primitive benchmark")
    scenario.add_argument("--bench-size", type=int, default=1024)
    scenario.add_argument("--bench-iters", type=int, default=2000)
    scenario.set_defaults(func=_cmd_scenario)

    bench = sub.add_parser("bench", help="time hash/sign/verify")
    bench.add_argument("--size", type=int, default=1024, help="body size in bytes")
    bench.add_argument("--iters", type=int, default=10000)
    bench.add_argument("--json", action="store_true", help="also print JSON")
    bench.set_defaults(func=_cmd_bench)

    keygen = sub.add_parser("keygen", help="generate a signing key")
    keygen.add_argument("--key-id", required=True)
    keygen.add_argument("--out", required=True, help="private key PEM path")
    keygen.add_argument("--keyset-out", help="also write a one-key trusted key set")
    keygen.set_defaults(func=_cmd_keygen)

    gateway = sub.add_parser("gateway", help="run a signing gateway")
    gateway.add_argument("--config", required=True, help="JSON config file")
    gateway.set_defaults(func=_cmd_gateway)

    origin = sub.add_parser("origin", help="run the demo origin")
    origin.add_argument("--listen", default="127.0.0.1:0")
    origin.add_argument("--docroot", help="serve files from this directory instead")
    origin.set_defaults(func=_cmd_origin)

    collector = sub.add_parser("collector", help="run the incident collector")
    collector.add_argument("--listen", default="127.0.0.1:0")
    collector.add_argument("--journal", help="JSONL journal path")
    collector.set_defaults(func=_cmd_collector)

    man = sub.add_parser("manifest", help="sign a directory into a manifest")
    man.add_argument("--key-file", required=True)
    man.add_argument("--key-id", required=True)
    man.add_argument("--version", type=int, required=True)
    man.add_argument("--root", required=True, help="directory of static assets")
    man.add_argument("--out", required=True)
    man.set_defaults(func=_cmd_manifest)

    vec = sub.add_parser("vectors", help="emit or check conformance vectors")
    vec.add_argument("--out", required=True, help="vector JSONL path")
    vec.add_argument("--keys", required=True, help="trusted key set JSON path")
    vec.add_argument("--check", action="store_true", help="verify instead of emit")
    vec.set_defaults(func=_cmd_vectors)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
