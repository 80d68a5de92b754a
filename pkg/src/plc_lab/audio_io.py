"""Mono 16-bit WAV I/O, packet segmentation, silence measurement, resampling.

The challenge pipeline works on 16-bit 44.1 kHz mono WAV files. Decoding maps
PCM value s to s/32768; encoding rounds half away from zero and saturates at
the int16 limits, so read/write round-trips are bit-exact on quantized data.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import firwin, resample_poly

from .errors import PlcError, WavFormatError

PACKET_SIZE = 512
CHALLENGE_RATE = 44100

SILENCE_WINDOW_SEC = 0.020
SILENCE_HOP_SEC = 0.010
SILENCE_RMS_THRESHOLD = 1e-3  # -60 dBFS

_PCM_SCALE = 32768.0


@dataclass(eq=False)
class Waveform:
    """Mono sample sequence with its sample rate. Samples are float64."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise PlcError("waveform samples must be one-dimensional")
        if int(self.sample_rate) <= 0:
            raise PlcError(f"sample rate must be positive, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class PacketGrid:
    """Partition of a waveform into whole 512-sample packets plus a tail."""

    packet_size: int
    whole_packets: int
    tail_samples: int


def packet_grid(w: Waveform, packet_size: int = PACKET_SIZE) -> PacketGrid:
    """Split a clip into whole packets; tail samples fall outside any trace."""
    n = len(w)
    return PacketGrid(packet_size, n // packet_size, n % packet_size)


def read_wav(path: str | Path) -> Waveform:
    """Read a RIFF/WAVE file holding 16-bit mono PCM.

    Raises WavFormatError on anything else: multichannel and non-16-bit files
    are not challenge inputs, not converted.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos:pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or len(fmt) < 16:
        raise WavFormatError(f"{path}: missing or short fmt chunk")
    if data is None:
        raise WavFormatError(f"{path}: missing data chunk")

    audio_format, channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if audio_format != 1:
        raise WavFormatError(f"{path}: unsupported format tag {audio_format} (want PCM)")
    if bits != 16:
        raise WavFormatError(f"{path}: unsupported bit depth {bits}")
    if channels != 1:
        raise WavFormatError(f"{path}: unsupported channel count {channels}")
    if len(data) % 2:
        raise WavFormatError(f"{path}: data chunk size is not a whole number of samples")

    pcm = np.frombuffer(data, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / _PCM_SCALE, sample_rate)


def write_wav(w: Waveform, path: str | Path) -> None:
    """Write 16-bit mono PCM. Samples must already lie in [-1, 1]."""
    s = w.samples
    if not np.all(np.isfinite(s)):
        raise PlcError("refusing to write non-finite samples")
    if len(s) and np.max(np.abs(s)) > 1.0:
        worst = float(np.max(np.abs(s)))
        raise PlcError(f"sample out of range (|s| = {worst:.6f} > 1); concealer output must be clipped")

    # round half away from zero, then saturate (+1.0 maps to 32767)
    q = np.trunc(s * _PCM_SCALE + np.copysign(0.5, s))
    pcm = np.clip(q, -32768, 32767).astype("<i2")
    payload = pcm.tobytes()

    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, 1, w.sample_rate, w.sample_rate * 2, 2, 16,
        b"data", len(payload),
    )
    Path(path).write_bytes(header + payload)


def silence_ratio(w: Waveform) -> float:
    """Fraction of 20 ms windows (10 ms hop) with RMS below -60 dBFS."""
    n = len(w)
    if n == 0:
        raise PlcError("silence_ratio needs a non-empty waveform")
    win = max(1, round(SILENCE_WINDOW_SEC * w.sample_rate))
    hop = max(1, round(SILENCE_HOP_SEC * w.sample_rate))
    if n < win:
        starts = [0]
        win = n
    else:
        starts = range(0, n - win + 1, hop)
    silent = 0
    total = 0
    for start in starts:
        seg = w.samples[start:start + win]
        total += 1
        if np.sqrt(np.mean(seg * seg)) < SILENCE_RMS_THRESHOLD:
            silent += 1
    return silent / total


@lru_cache(maxsize=8)
def _resample_filter(up: int, down: int, taps_per_phase: int = 64, beta: float = 8.9575) -> np.ndarray:
    # Kaiser beta ~8.96 gives a >90 dB stopband; resample_poly scales by `up`.
    half = (taps_per_phase * max(up, down)) // 2
    return firwin(2 * half + 1, 1.0 / max(up, down), window=("kaiser", beta))


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Polyphase windowed-sinc rate conversion; output length round(N*target/source)."""
    if target_rate <= 0:
        raise PlcError(f"target rate must be positive, got {target_rate}")
    if target_rate == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)
    g = math.gcd(w.sample_rate, target_rate)
    up, down = target_rate // g, w.sample_rate // g
    n_out = (len(w) * target_rate + w.sample_rate // 2) // w.sample_rate
    if len(w) == 0:
        return Waveform(np.zeros(0), target_rate)
    y = resample_poly(w.samples, up, down, window=_resample_filter(up, down))
    if len(y) >= n_out:
        y = y[:n_out]
    else:
        y = np.pad(y, (0, n_out - len(y)))
    return Waveform(y, target_rate)
