"""Batch evaluation of concealment systems over a degraded corpus."""

from __future__ import annotations

import csv
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_io import Waveform, read_wav
from .conceal import CONCEALERS, EngineConfig, conceal_waveform
from .errors import PlcError
from .metrics import LOWER_IS_BETTER, METRIC_NAMES, MetricReport, evaluate_clip
from .trace_model import PacketTrace, parse_trace

PER_CLIP_FIELDS = ["clip_id", "system"] + list(METRIC_NAMES)


@dataclass(frozen=True)
class SystemUnderTest:
    """Either a built-in concealer (method) or a directory of pre-enhanced WAVs."""

    name: str
    method: str | None = None
    directory: Path | None = None

    def __post_init__(self):
        if (self.method is None) == (self.directory is None):
            raise PlcError("a system is either a built-in method or a directory, not both")
        if self.method is not None and self.method not in CONCEALERS:
            raise PlcError(f"unknown built-in concealer {self.method!r}")


@dataclass(eq=False)
class CorpusItem:
    clip_id: str
    clean: Waveform
    lossy: Waveform
    trace: PacketTrace


@dataclass(eq=False)
class ClipResult:
    clip_id: str
    system: str
    report: MetricReport


@dataclass(eq=False)
class CorpusReport:
    system: str
    per_clip: list[ClipResult]
    means: dict[str, float]
    infinite_counts: dict[str, int]
    rtf: float | None

    @property
    def clip_ids(self) -> list[str]:
        return [r.clip_id for r in self.per_clip]


def load_corpus(manifest_path: str | Path) -> list[CorpusItem]:
    """Load a degrade-built corpus: clean/lossy/trace live next to the manifest."""
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    items = []
    with open(manifest_path, newline="") as fh:
        for row in csv.DictReader(fh):
            clip_id = row["clip_id"]
            items.append(CorpusItem(
                clip_id=clip_id,
                clean=read_wav(root / "clean" / f"{clip_id}.wav"),
                lossy=read_wav(root / "lossy" / f"{clip_id}.wav"),
                trace=parse_trace((root / "traces" / f"{clip_id}.txt").read_text(), clip_id),
            ))
    if not items:
        raise PlcError(f"{manifest_path}: empty corpus")
    return items


def _enhanced_for(sut: SystemUnderTest, item: CorpusItem, config: EngineConfig) -> tuple[Waveform, float]:
    """Produce (estimate, processing seconds); submissions count as zero seconds."""
    if sut.method is not None:
        start = time.perf_counter()
        est = conceal_waveform(item.lossy, item.trace, config, sut.method)
        return est, time.perf_counter() - start
    path = Path(sut.directory) / f"{item.clip_id}.wav"
    if not path.exists():
        raise PlcError(f"system {sut.name!r} is missing the enhanced file for clip {item.clip_id!r}")
    est = read_wav(path)
    if est.sample_rate != item.lossy.sample_rate:
        raise PlcError(f"{path}: sample rate {est.sample_rate} != {item.lossy.sample_rate}")
    if len(est) != len(item.lossy):
        raise PlcError(
            f"{path}: {len(est)} samples, expected {len(item.lossy)} (length must match, no trimming)"
        )
    return est, 0.0


def summarize(per_clip: Sequence[ClipResult]) -> tuple[dict[str, float], dict[str, int]]:
    """Per-metric means over finite values, plus counts of infinities."""
    means: dict[str, float] = {}
    inf_counts: dict[str, int] = {}
    for name in METRIC_NAMES:
        values = [getattr(r.report, name) for r in per_clip]
        finite = [v for v in values if np.isfinite(v)]
        inf_counts[name] = len(values) - len(finite)
        means[name] = float(np.mean(finite)) if finite else float("nan")
    return means, inf_counts


def evaluate_system(
    sut: SystemUnderTest,
    corpus: Sequence[CorpusItem],
    config: EngineConfig | None = None,
    jobs: int = 1,
) -> CorpusReport:
    """Score one system on every clip; records the real-time factor for built-ins."""
    if not corpus:
        raise PlcError("corpus is empty")
    cfg = config or EngineConfig()

    def one(item: CorpusItem) -> tuple[ClipResult, float]:
        est, seconds = _enhanced_for(sut, item, cfg)
        report = evaluate_clip(item.clean, est)
        return ClipResult(item.clip_id, sut.name, report), seconds

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, corpus))
    else:
        outcomes = [one(item) for item in corpus]

    per_clip = [r for r, _ in outcomes]
    total_seconds = sum(s for _, s in outcomes)
    means, inf_counts = summarize(per_clip)
    rtf = None
    if sut.method is not None:
        total_duration = sum(item.lossy.duration for item in corpus)
        rtf = total_seconds / total_duration
    return CorpusReport(sut.name, per_clip, means, inf_counts, rtf)


def measure_rtf(sut: SystemUnderTest, item: CorpusItem, config: EngineConfig | None = None) -> float:
    """Median over 3 single-threaded runs of processing time / clip duration."""
    if sut.method is None:
        raise PlcError("real-time factor only makes sense for built-in concealers")
    cfg = config or EngineConfig()
    ratios = []
    for _ in range(3):
        start = time.perf_counter()
        conceal_waveform(item.lossy, item.trace, cfg, sut.method)
        ratios.append((time.perf_counter() - start) / item.lossy.duration)
    return round(statistics.median(ratios), 3)


def aggregate(reports: Sequence[CorpusReport]) -> list[dict]:
    """One row per system with per-metric means; the best value per metric is flagged."""
    if not reports:
        raise PlcError("nothing to aggregate")
    clip_sets = {tuple(sorted(r.clip_ids)) for r in reports}
    if len(clip_sets) > 1:
        raise PlcError("reports cover different corpora; refusing to compare")
    rows = []
    for rep in reports:
        row: dict = {"system": rep.system, "n_clips": len(rep.per_clip), "rtf": rep.rtf}
        for name in METRIC_NAMES:
            row[name] = rep.means[name]
            row[f"{name}_inf"] = rep.infinite_counts[name]
        rows.append(row)
    for name in METRIC_NAMES:
        values = [row[name] for row in rows]
        pick = np.nanargmin(values) if LOWER_IS_BETTER[name] else np.nanargmax(values)
        for i, row in enumerate(rows):
            row[f"{name}_best"] = i == int(pick)
    return rows


def write_per_clip_csv(reports: Sequence[CorpusReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=PER_CLIP_FIELDS)
        writer.writeheader()
        for rep in reports:
            for result in rep.per_clip:
                row = {"clip_id": result.clip_id, "system": result.system}
                row.update({k: repr(v) for k, v in result.report.as_dict().items()})
                writer.writerow(row)


def write_summary_csv(rows: Sequence[dict], path: str | Path) -> None:
    fields = ["system", "n_clips"] + [c for name in METRIC_NAMES for c in (name, f"{name}_inf")] + ["rtf"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for name in METRIC_NAMES:
                out[name] = f"{row[name]:.6g}"
            if out.get("rtf") is not None:
                out["rtf"] = f"{row['rtf']:.3f}"
            writer.writerow(out)


def format_markdown_table(rows: Sequence[dict]) -> str:
    """Comparison table; the best value in each metric column is bolded."""
    header = ["system", "n_clips"] + list(METRIC_NAMES) + ["rtf"]
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    for row in rows:
        cells = [str(row["system"]), str(row["n_clips"])]
        for name in METRIC_NAMES:
            text = f"{row[name]:.4g}"
            if row[f"{name}_inf"]:
                text += f" ({row[f'{name}_inf']}∞)"
            cells.append(f"**{text}**" if row[f"{name}_best"] else text)
        cells.append("-" if row["rtf"] is None else f"{row['rtf']:.3f}")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
