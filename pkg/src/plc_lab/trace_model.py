"""Packet-loss traces: parsing, burst statistics, subset classification, sampling.

A trace is a string of binary digits, one per 512-sample packet: 0 received,
1 lost. Traces are grouped into three subsets by maximum burst length, and
blind-set clips draw traces from Subset 1 with probability 0.9 and Subset 2
with probability 0.1, concatenating up to three traces per clip.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import PlcError, TraceParseError

SUBSET_WEIGHTS = (0.9, 0.1)
MAX_SEGMENTS = 3
MAX_CLASSIFIABLE_BURST = 50


class SubsetLabel(enum.Enum):
    SUBSET1 = "Subset1"  # max burst 0-6
    SUBSET2 = "Subset2"  # max burst 7-16
    SUBSET3 = "Subset3"  # max burst 17-50


@dataclass(eq=False)
class PacketTrace:
    """Per-packet loss flags (True = lost) with an optional source label."""

    flags: np.ndarray
    source_id: str | None = None

    def __post_init__(self):
        self.flags = np.asarray(self.flags, dtype=bool)
        if self.flags.ndim != 1:
            raise PlcError("trace flags must be one-dimensional")

    def __len__(self) -> int:
        return len(self.flags)

    def serialize(self) -> str:
        return "".join("1" if f else "0" for f in self.flags)


@dataclass(frozen=True)
class BurstStats:
    loss_rate: float
    burst_lengths: tuple[int, ...]
    max_burst: int


@dataclass(frozen=True)
class TracePlan:
    """Recipe for one clip: which traces to concatenate and how many packets each contributes.

    A segment may consume more packets than its trace holds, in which case the
    trace is cycled; that only happens for the last segment of very long clips.
    """

    clip_packets: int
    segments: tuple[tuple[PacketTrace, int], ...]
    rng_seed: int
    subset_draws: tuple[SubsetLabel, ...] = field(default=())

    def __post_init__(self):
        total = sum(count for _, count in self.segments)
        if total != self.clip_packets:
            raise PlcError(f"plan covers {total} packets, clip needs {self.clip_packets}")
        if len(self.segments) > MAX_SEGMENTS:
            raise PlcError(f"plan has {len(self.segments)} segments, limit is {MAX_SEGMENTS}")


def parse_trace(text: str, source_id: str | None = None) -> PacketTrace:
    """Parse a digit string; whitespace is ignored, anything else is an error."""
    flags = []
    for offset, ch in enumerate(text):
        if ch == "0":
            flags.append(False)
        elif ch == "1":
            flags.append(True)
        elif ch.isspace():
            continue
        else:
            raise TraceParseError(f"invalid trace character {ch!r}", offset)
    if not flags:
        raise PlcError("trace contains no packets")
    return PacketTrace(np.array(flags, dtype=bool), source_id)


def burst_stats(trace: PacketTrace) -> BurstStats:
    """Enumerate maximal runs of consecutive lost packets, left to right."""
    flags = trace.flags
    bursts = []
    run = 0
    for lost in flags:
        if lost:
            run += 1
        elif run:
            bursts.append(run)
            run = 0
    if run:
        bursts.append(run)
    n_lost = int(np.count_nonzero(flags))
    return BurstStats(
        loss_rate=n_lost / len(flags) if len(flags) else 0.0,
        burst_lengths=tuple(bursts),
        max_burst=max(bursts, default=0),
    )


def classify_subset(stats: BurstStats) -> SubsetLabel:
    """Partition on max burst: 0-6 / 7-16 / 17-50; longer bursts are rejected."""
    b = stats.max_burst
    if b <= 6:
        return SubsetLabel.SUBSET1
    if b <= 16:
        return SubsetLabel.SUBSET2
    if b <= MAX_CLASSIFIABLE_BURST:
        return SubsetLabel.SUBSET3
    raise PlcError(f"max burst {b} exceeds {MAX_CLASSIFIABLE_BURST}; trace is outside every subset")


def group_by_subset(traces: Sequence[PacketTrace]) -> dict[SubsetLabel, list[PacketTrace]]:
    pools: dict[SubsetLabel, list[PacketTrace]] = {label: [] for label in SubsetLabel}
    for t in traces:
        pools[classify_subset(burst_stats(t))].append(t)
    return pools


def sample_trace_plan(
    clip_packets: int,
    pools: Mapping[SubsetLabel, Sequence[PacketTrace]],
    seed: int,
    weights: tuple[float, float] = SUBSET_WEIGHTS,
) -> TracePlan:
    """Draw traces i.i.d. (Subset1/Subset2 weighted, uniform within a pool) and
    concatenate until the clip is covered, truncating the last draw.

    At most three traces are drawn; if they still fall short, the third one is
    cycled for the remainder. Deterministic for a given seed.
    """
    if clip_packets < 0:
        raise PlcError("clip_packets must be non-negative")
    for label in (SubsetLabel.SUBSET1, SubsetLabel.SUBSET2):
        if not pools.get(label):
            raise PlcError(f"empty trace pool for {label.value}")

    rng = np.random.default_rng(seed)
    segments: list[tuple[PacketTrace, int]] = []
    draws: list[SubsetLabel] = []
    covered = 0
    while covered < clip_packets and len(segments) < MAX_SEGMENTS:
        label = SubsetLabel.SUBSET1 if rng.random() < weights[0] else SubsetLabel.SUBSET2
        pool = pools[label]
        trace = pool[int(rng.integers(len(pool)))]
        remaining = clip_packets - covered
        last_slot = len(segments) == MAX_SEGMENTS - 1
        take = remaining if last_slot else min(len(trace), remaining)
        segments.append((trace, take))
        draws.append(label)
        covered += take
    return TracePlan(clip_packets, tuple(segments), seed, tuple(draws))


def realize_plan(plan: TracePlan, source_id: str | None = None) -> PacketTrace:
    """Flatten a plan into a trace of exactly clip_packets flags."""
    parts = []
    for trace, count in plan.segments:
        if count <= len(trace):
            parts.append(trace.flags[:count])
        else:
            reps = -(-count // len(trace))
            parts.append(np.tile(trace.flags, reps)[:count])
    flags = np.concatenate(parts) if parts else np.zeros(0, dtype=bool)
    return PacketTrace(flags, source_id)


def format_plan(plan: TracePlan) -> str:
    """Line format: ``seed, clip_packets, trace_id:count, ...``."""
    items = []
    for trace, count in plan.segments:
        if not trace.source_id:
            raise PlcError("cannot serialize a plan whose traces have no source_id")
        if ":" in trace.source_id or "," in trace.source_id:
            raise PlcError(f"trace id {trace.source_id!r} contains a reserved character")
        items.append(f"{trace.source_id}:{count}")
    return ", ".join([str(plan.rng_seed), str(plan.clip_packets)] + items)


def parse_plan(line: str, traces_by_id: Mapping[str, PacketTrace]) -> TracePlan:
    fields = [f.strip() for f in line.split(",")]
    if len(fields) < 2:
        raise PlcError(f"malformed plan line: {line!r}")
    try:
        seed, clip_packets = int(fields[0]), int(fields[1])
    except ValueError as exc:
        raise PlcError(f"malformed plan line: {line!r}") from exc
    segments = []
    for item in fields[2:]:
        trace_id, _, count = item.partition(":")
        if trace_id not in traces_by_id:
            raise PlcError(f"plan references unknown trace {trace_id!r}")
        segments.append((traces_by_id[trace_id], int(count)))
    return TracePlan(clip_packets, tuple(segments), seed)


def pool_summary(pools: Mapping[SubsetLabel, Sequence[PacketTrace]]) -> Counter:
    return Counter({label.value: len(traces) for label, traces in pools.items()})
