"""plc-lab: music packet-loss-concealment challenge toolkit.

Degrade clips with measured packet traces, conceal losses with strictly
causal concealers, score the results with five objective metrics, and run
MUSHRA listening sessions to produce the challenge ranking.
"""

__version__ = "0.1.0"

FORMAT_VERSIONS = {
    "manifest": 1,
    "trace-plan": 1,
    "ratings": 1,
}

from .audio_io import Waveform, packet_grid, read_wav, resample, silence_ratio, write_wav
from .conceal import ConcealmentEngine, EngineConfig, conceal_waveform, crossfade, fit_ar
from .degrade import LossyClip, apply_zero_fill, build_blind_item
from .errors import PlcError
from .metrics import MetricReport, evaluate_clip, lsd, mcd, mse, sdr, si_sdr
from .trace_model import PacketTrace, burst_stats, classify_subset, parse_trace

__all__ = [
    "__version__",
    "FORMAT_VERSIONS",
    "Waveform",
    "packet_grid",
    "read_wav",
    "resample",
    "silence_ratio",
    "write_wav",
    "ConcealmentEngine",
    "EngineConfig",
    "conceal_waveform",
    "crossfade",
    "fit_ar",
    "LossyClip",
    "apply_zero_fill",
    "build_blind_item",
    "PlcError",
    "MetricReport",
    "evaluate_clip",
    "lsd",
    "mcd",
    "mse",
    "sdr",
    "si_sdr",
    "PacketTrace",
    "burst_stats",
    "classify_subset",
    "parse_trace",
]
