"""Trace-driven degradation: zero-filling and blind-set corpus assembly."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .audio_io import PACKET_SIZE, Waveform, packet_grid, read_wav, silence_ratio, write_wav
from .errors import PlcError, SilenceGateError
from .seeding import derive_seed
from .trace_model import (
    PacketTrace,
    SubsetLabel,
    TracePlan,
    format_plan,
    realize_plan,
    sample_trace_plan,
)

SILENCE_GATE = 0.30
CLIP_SAMPLES = 511560  # 11.6 s at 44.1 kHz

MANIFEST_FIELDS = ["clip_id", "source_file", "seed", "trace_plan", "silence_ratio", "subset_draws"]


@dataclass(eq=False)
class LossyClip:
    """A degraded clip: zero-filled audio, the trace that produced it, provenance."""

    audio: Waveform
    trace: PacketTrace
    origin: str | None = None
    plan: TracePlan | None = None


def apply_zero_fill(clean: Waveform, trace: PacketTrace, origin: str | None = None) -> LossyClip:
    """Zero every lost packet; received packets and the tail pass through bit-exactly."""
    grid = packet_grid(clean)
    if len(trace) != grid.whole_packets:
        raise PlcError(
            f"trace covers {len(trace)} packets but clip has {grid.whole_packets}"
        )
    samples = clean.samples.copy()
    for i in np.flatnonzero(trace.flags):
        samples[i * PACKET_SIZE:(i + 1) * PACKET_SIZE] = 0.0
    return LossyClip(Waveform(samples, clean.sample_rate), trace, origin)


def build_blind_item(
    clean: Waveform,
    pools: Mapping[SubsetLabel, Sequence[PacketTrace]],
    seed: int,
    origin: str | None = None,
) -> LossyClip:
    """Sample a trace plan for the clip, realize it, and zero-fill.

    Clips with more than 30% silence are rejected, mirroring the blind-set
    construction; the gate runs on the clean clip.
    """
    ratio = silence_ratio(clean)
    if ratio > SILENCE_GATE:
        raise SilenceGateError(
            f"clip is {ratio:.1%} silence (gate is {SILENCE_GATE:.0%}); discard it"
        )
    plan = sample_trace_plan(packet_grid(clean).whole_packets, pools, seed)
    trace = realize_plan(plan)
    item = apply_zero_fill(clean, trace, origin)
    item.plan = plan
    return item


def segment_recording(w: Waveform, clip_samples: int = CLIP_SAMPLES) -> list[Waveform]:
    """Cut a long recording into fixed-length clips, no overlap, partial tail dropped."""
    return [
        Waveform(w.samples[start:start + clip_samples].copy(), w.sample_rate)
        for start in range(0, len(w) - clip_samples + 1, clip_samples)
    ]


def build_corpus(
    clean_files: Sequence[Path],
    pools: Mapping[SubsetLabel, Sequence[PacketTrace]],
    out_dir: Path,
    master_seed: int,
    segment: bool = False,
) -> tuple[list[dict], list[tuple[str, str]]]:
    """Degrade a set of clean files into ``out_dir/{clean,lossy,traces}`` + manifest.csv.

    Returns (manifest rows, skipped [(clip_id, reason)]). Per-clip seeds derive
    from the master seed and the clip index, so the build is reproducible and
    order-independent given the same sorted file list.
    """
    out_dir = Path(out_dir)
    for sub in ("clean", "lossy", "traces"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    clips: list[tuple[str, Path, Waveform]] = []
    for path in clean_files:
        w = read_wav(path)
        if segment:
            for i, piece in enumerate(segment_recording(w)):
                clips.append((f"{Path(path).stem}_{i:03d}", Path(path), piece))
        else:
            clips.append((Path(path).stem, Path(path), w))

    rows: list[dict] = []
    skipped: list[tuple[str, str]] = []
    for index, (clip_id, source, clean) in enumerate(clips):
        seed = derive_seed(master_seed, index)
        try:
            item = build_blind_item(clean, pools, seed, origin=clip_id)
        except SilenceGateError as exc:
            skipped.append((clip_id, str(exc)))
            continue
        write_wav(clean, out_dir / "clean" / f"{clip_id}.wav")
        write_wav(item.audio, out_dir / "lossy" / f"{clip_id}.wav")
        (out_dir / "traces" / f"{clip_id}.txt").write_text(item.trace.serialize() + "\n")
        rows.append({
            "clip_id": clip_id,
            "source_file": str(source),
            "seed": seed,
            "trace_plan": format_plan(item.plan),
            "silence_ratio": f"{silence_ratio(clean):.6f}",
            "subset_draws": "|".join(d.value for d in item.plan.subset_draws),
        })

    with open(out_dir / "manifest.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    return rows, skipped
