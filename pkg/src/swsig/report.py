"""Result artifacts for experiment runs.

One report base path yields three files: ``<base>.json`` with the full
machine-readable result, ``<base>.csv`` with one row per interception
rate for spreadsheet work, and ``<base>.png`` plotting detections against
ground truth across the rate grid.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .harness import BenchmarkResult, ScenarioResult  # noqa: E402

logger = logging.getLogger(__name__)


def report_base(path: str | Path) -> Path:
    """Normalize a report argument: strip a .json/.csv/.png suffix if given."""
    base = Path(path)
    if base.suffix in (".json", ".csv", ".png"):
        base = base.with_suffix("")
    return base


def write_json(result: ScenarioResult, path: Path, benchmark: Optional[BenchmarkResult]) -> None:
    payload = result.to_dict()
    if benchmark is not None:
        payload["benchmark"] = benchmark.to_dict()
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(result: ScenarioResult, path: Path) -> None:
    reason_keys = sorted({key for tally in result.tallies for key in tally.reject_reasons})
    fields = [
        "rate",
        "requests",
        "tampered",
        "true_positives",
        "false_negatives",
        "false_positives",
        "true_negatives",
        "duration_seconds",
    ] + [f"reason_{key}" for key in reason_keys]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for tally in result.tallies:
            row = [
                f"{tally.rate:.2f}",
                tally.requests,
                tally.tampered,
                tally.true_positives,
                tally.false_negatives,
                tally.false_positives,
                tally.true_negatives,
                f"{tally.duration_seconds:.3f}",
            ] + [tally.reject_reasons.get(key, 0) for key in reason_keys]
            writer.writerow(row)


def write_figure(result: ScenarioResult, path: Path) -> None:
    rates = [tally.rate * 100 for tally in result.tallies]
    tampered = [tally.tampered for tally in result.tallies]
    detected = [tally.true_positives for tally in result.tallies]
    fn = [tally.false_negatives for tally in result.tallies]
    fp = [tally.false_positives for tally in result.tallies]

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    top.plot(rates, tampered, label="tampered (ground truth)", color="#888888", linewidth=3)
    top.plot(rates, detected, label="detected (rejected)", color="#c0392b", linewidth=1)
    top.set_ylabel("responses")
    top.set_title(
        f"Scenario {result.spec.scenario}: detections vs ground truth "
        f"({result.spec.requests_per_rate} requests/rate)"
    )
    top.legend(loc="upper left")
    top.grid(True, alpha=0.3)

    bottom.plot(rates, fn, label="false negatives", color="#c0392b")
    bottom.plot(rates, fp, label="false positives", color="#2980b9")
    bottom.set_xlabel("interception rate (%)")
    bottom.set_ylabel("errors")
    bottom.legend(loc="upper left")
    bottom.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def summary_table(result: ScenarioResult, benchmark: Optional[BenchmarkResult] = None) -> str:
    """Fixed-width per-rate table plus a verdict line, for terminal output."""
    lines = []
    header = (
        f"{'rate':>6} {'requests':>9} {'tampered':>9} {'detected':>9} "
        f"{'FN':>5} {'FP':>5} {'secs':>7}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for tally in result.tallies:
        lines.append(
            f"{tally.rate * 100:>5.0f}% {tally.requests:>9} {tally.tampered:>9} "
            f"{tally.true_positives:>9} {tally.false_negatives:>5} "
            f"{tally.false_positives:>5} {tally.duration_seconds:>7.2f}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"total requests {result.total_requests}, "
        f"false negatives {result.total_false_negatives}, "
        f"false positives {result.total_false_positives}, "
        f"wall clock {result.wall_clock_seconds:.1f}s"
    )
    if result.total_false_negatives == 0 and result.total_false_positives == 0:
        lines.append("every tampered response detected; no clean response rejected")
    else:
        lines.append("DETECTION GAPS PRESENT - see per-rate rows above")
    if benchmark is not None:
        lines.append(
            f"benchmark: body {benchmark.body_size} B x {benchmark.iterations} iters: "
            f"hash {benchmark.hash_mean_ns / 1e3:.2f} us, "
            f"sign {benchmark.sign_mean_ns / 1e3:.2f} us, "
            f"verify {benchmark.verify_mean_ns / 1e3:.2f} us (means)"
        )
    return "\n".join(lines)


def write_report(
    result: ScenarioResult,
    base: str | Path,
    *,
    benchmark: Optional[BenchmarkResult] = None,
) -> dict[str, Path]:
    """Write all three artifacts next to each other; returns their paths."""
    base_path = report_base(base)
    base_path.parent.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": base_path.with_suffix(".json"),
        "csv": base_path.with_suffix(".csv"),
        "png": base_path.with_suffix(".png"),
    }
    write_json(result, paths["json"], benchmark)
    write_csv(result, paths["csv"])
    write_figure(result, paths["png"])
    logger.info("report written: %s", ", ".join(str(p) for p in paths.values()))
    return paths
