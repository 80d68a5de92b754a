#!/usr/bin/env python3
"""Desk-scale benchmark: degrade a synthetic tonal corpus with burst traces,
run all three built-in concealers, and print the comparison table.

Usage: python3 scripts/synthetic_benchmark.py [--clips N] [--seed S] [--workdir DIR]
"""

import argparse
import sys
import tempfile
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from plc_lab.audio_io import PACKET_SIZE, Waveform, write_wav
from plc_lab.conceal import EngineConfig
from plc_lab.degrade import build_corpus
from plc_lab.harness import (
    SystemUnderTest,
    aggregate,
    evaluate_system,
    format_markdown_table,
    load_corpus,
    measure_rtf,
    write_per_clip_csv,
    write_summary_csv,
)
from plc_lab.trace_model import PacketTrace, SubsetLabel

RATE = 44100


def make_clip(rng, packets=60):
    base = RATE / PACKET_SIZE
    f0 = base * (int(rng.integers(3, 24)) + rng.uniform(0.02, 0.05))
    n = packets * PACKET_SIZE
    t = np.arange(n)
    x = sum(a * np.sin(2 * np.pi * f0 * h * t / RATE + rng.uniform(0, 2 * np.pi))
            for h, a in ((1, 0.5), (2, 0.25), (3, 0.12)))
    x *= 1.0 - 0.25 * t / n
    return Waveform(x, RATE)


def make_trace_pools(rng):
    pools = {SubsetLabel.SUBSET1: [], SubsetLabel.SUBSET2: []}
    for i in range(12):
        flags = np.zeros(40, dtype=bool)
        pos = 2
        while pos < 38:
            if rng.random() < 0.2:
                burst = int(rng.integers(1, 5))
                flags[pos:pos + burst] = True
                pos += burst + 2
            else:
                pos += 1
        pools[SubsetLabel.SUBSET1].append(PacketTrace(flags, f"s1_{i}"))
    for i in range(3):
        flags = np.zeros(40, dtype=bool)
        start = int(rng.integers(5, 25))
        flags[start:start + int(rng.integers(7, 15))] = True
        pools[SubsetLabel.SUBSET2].append(PacketTrace(flags, f"s2_{i}"))
    return pools


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--clips", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workdir", type=str, default=None)
    args = parser.parse_args()

    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="plc_bench_"))
    clean_dir = workdir / "clean_src"
    clean_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    for i in range(args.clips):
        write_wav(make_clip(rng), clean_dir / f"tone{i:03d}.wav")

    pools = make_trace_pools(rng)
    corpus_dir = workdir / "corpus"
    rows, skipped = build_corpus(sorted(clean_dir.glob("*.wav")), pools, corpus_dir, args.seed)
    print(f"built {len(rows)} degraded clips under {corpus_dir} ({len(skipped)} skipped)")

    corpus = load_corpus(corpus_dir / "manifest.csv")
    cfg = EngineConfig()
    reports = []
    for method in ("zero", "repeat", "ar"):
        report = evaluate_system(SystemUnderTest(method, method=method), corpus, cfg)
        reports.append(report)
        print(f"{method}: corpus rtf {report.rtf:.3f}")

    table_rows = aggregate(reports)
    write_per_clip_csv(reports, workdir / "per_clip.csv")
    write_summary_csv(table_rows, workdir / "summary.csv")
    print()
    print(format_markdown_table(table_rows))
    single = measure_rtf(SystemUnderTest("ar", method="ar"), corpus[0], cfg)
    print(f"single-clip rtf (ar, median of 3): {single:.3f}")
    print(f"outputs: {workdir}/per_clip.csv, {workdir}/summary.csv")


if __name__ == "__main__":
    main()
