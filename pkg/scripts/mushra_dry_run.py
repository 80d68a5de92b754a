#!/usr/bin/env python3
"""Simulated listening test: build stimuli from a synthetic corpus, let noisy
virtual assessors rate every trial through the real session machinery, and
print the resulting ranking.

Usage: python3 scripts/mushra_dry_run.py [--assessors N] [--seed S] [--workdir DIR]
"""

import argparse
import sys
import tempfile
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from plc_lab.audio_io import PACKET_SIZE, Waveform, write_wav
from plc_lab.conceal import EngineConfig, conceal_waveform
from plc_lab.degrade import apply_zero_fill
from plc_lab.mushra import (
    ANCHOR,
    REFERENCE,
    Rating,
    RatingStore,
    StimulusSet,
    compute_ranking,
    format_ranking_table,
    resolve_ratings,
)
from plc_lab.service import SessionService
from plc_lab.trace_model import PacketTrace

RATE = 44100
SYSTEMS = ["ar_engine", "repeat_engine", "smoothed", "midquality"]

# plausible BAQ tendencies per condition for the virtual assessors
TRUE_QUALITY = {REFERENCE: 98, ANCHOR: 18, "ar_engine": 82, "repeat_engine": 55,
                "smoothed": 64, "midquality": 47}


def make_clip(rng, packets=40):
    f0 = (RATE / PACKET_SIZE) * (int(rng.integers(3, 20)) + rng.uniform(0.02, 0.05))
    t = np.arange(packets * PACKET_SIZE)
    x = 0.5 * np.sin(2 * np.pi * f0 * t / RATE) + 0.2 * np.sin(2 * np.pi * 2 * f0 * t / RATE + 1.0)
    return Waveform(x, RATE)


def build_stimuli(workdir, rng):
    clips = [f"clip{i:02d}" for i in range(10)]
    dirs = {name: workdir / "sys" / name for name in SYSTEMS}
    refs, anchors = workdir / "refs", workdir / "anchors"
    for d in [refs, anchors, *dirs.values()]:
        d.mkdir(parents=True, exist_ok=True)
    cfg = EngineConfig()
    for clip_id in clips:
        clean = make_clip(rng)
        flags = np.zeros(40, dtype=bool)
        for start in (8, 19, 30):
            flags[start:start + int(rng.integers(1, 4))] = True
        trace = PacketTrace(flags)
        lossy = apply_zero_fill(clean, trace).audio
        write_wav(clean, refs / f"{clip_id}.wav")
        write_wav(lossy, anchors / f"{clip_id}.wav")
        write_wav(conceal_waveform(lossy, trace, cfg, "ar"), dirs["ar_engine"] / f"{clip_id}.wav")
        write_wav(conceal_waveform(lossy, trace, cfg, "repeat"), dirs["repeat_engine"] / f"{clip_id}.wav")
        # two synthetic mid-grade conditions: lowpassed and attenuated variants
        smoothed = np.convolve(lossy.samples, np.ones(9) / 9, mode="same")
        write_wav(Waveform(smoothed, RATE), dirs["smoothed"] / f"{clip_id}.wav")
        write_wav(Waveform(0.6 * lossy.samples, RATE), dirs["midquality"] / f"{clip_id}.wav")
    return StimulusSet(refs, anchors, dirs), clips


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--assessors", type=int, default=12)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workdir", type=str, default=None)
    args = parser.parse_args()

    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="plc_mushra_"))
    rng = np.random.default_rng(args.seed)
    stimuli, clips = build_stimuli(workdir, rng)
    service = SessionService(
        stimuli=stimuli, trial_clips=clips, systems=SYSTEMS,
        master_seed=args.seed, store=RatingStore(workdir / "ratings.jsonl"),
    )

    for a in range(args.assessors):
        assessor = f"sim{a:02d}"
        session = service.session_for(assessor)
        batch = []
        for trial in session.trials:
            for cond in trial.conditions:
                score = TRUE_QUALITY[cond.name] + rng.normal(0, 6)
                batch.append(Rating(assessor, trial.trial_id, cond.token,
                                    int(np.clip(round(score), 0, 100))))
        service.store.record_batch(batch, session)

    ratings = service.store.all_ratings()
    sessions = {r.assessor_id: service.session_for(r.assessor_id) for r in ratings}
    records = resolve_ratings(ratings, sessions)
    result = compute_ranking(records, SYSTEMS)
    print(f"{len(ratings)} ratings from {args.assessors} assessors\n")
    print(format_ranking_table(result))
    print(f"rating log: {workdir}/ratings.jsonl")


if __name__ == "__main__":
    main()
