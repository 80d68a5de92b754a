"""Objective quality metrics: MSE, SDR, SI-SDR, LSD, MCD.

Conventions that the printed formulas leave open, pinned here:
  * LSD uses squared log10 power differences averaged over all K+1 bins,
    2048-sample Hann frames, hop 512; magnitudes are floored at 1e-10 before
    the log so digital silence stays finite.
  * MCD uses 1024-sample Hann frames, hop 512, a 20-band triangular
    unit-peak mel filterbank (HTK warping, 0 Hz..Nyquist), natural-log mel
    energies, an orthonormal DCT-II, and coefficients 1..16 (c0 excluded).
  * SDR and SI-SDR report +inf for exact (up to scale) estimates; corpus
    averaging excludes infinities and counts them separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from .audio_io import Waveform
from .errors import PlcError

LSD_FRAME = 2048
LSD_HOP = 512
MCD_FRAME = 1024
MCD_HOP = 512
MEL_BANDS = 20
MCD_COEFFS = 16
MAG_FLOOR = 1e-10

METRIC_NAMES = ("mse", "sdr_db", "si_sdr_db", "lsd", "mcd")
LOWER_IS_BETTER = {"mse": True, "sdr_db": False, "si_sdr_db": False, "lsd": True, "mcd": True}


@dataclass(frozen=True)
class MetricReport:
    mse: float
    sdr_db: float
    si_sdr_db: float
    lsd: float
    mcd: float
    si_sdr_alpha: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _check_pair(ref: Waveform, est: Waveform) -> tuple[np.ndarray, np.ndarray]:
    if len(ref) != len(est):
        raise PlcError(f"length mismatch: reference {len(ref)} vs estimate {len(est)}")
    if ref.sample_rate != est.sample_rate:
        raise PlcError(f"rate mismatch: {ref.sample_rate} vs {est.sample_rate}")
    return ref.samples, est.samples


def mse(ref: Waveform, est: Waveform) -> float:
    y, y_hat = _check_pair(ref, est)
    if len(y) == 0:
        raise PlcError("mse needs non-empty waveforms")
    d = y - y_hat
    return float(np.dot(d, d) / len(y))


def sdr(ref: Waveform, est: Waveform) -> float:
    """10*log10(||y||^2 / ||y - y_hat||^2), +inf for an exact estimate."""
    y, y_hat = _check_pair(ref, est)
    ref_energy = float(np.dot(y, y))
    if ref_energy == 0.0:
        raise PlcError("SDR is undefined for an all-zero reference")
    d = y - y_hat
    err_energy = float(np.dot(d, d))
    if err_energy == 0.0:
        return float("inf")
    return 10.0 * np.log10(ref_energy / err_energy)


def si_sdr_alpha(ref: Waveform, est: Waveform) -> float:
    y, y_hat = _check_pair(ref, est)
    ref_energy = float(np.dot(y, y))
    if ref_energy == 0.0:
        raise PlcError("SI-SDR is undefined for an all-zero reference")
    return float(np.dot(y_hat, y) / ref_energy)


def si_sdr(ref: Waveform, est: Waveform) -> float:
    """Scale-invariant SDR: project the estimate's scale onto the reference first."""
    y, y_hat = _check_pair(ref, est)
    if float(np.dot(y_hat, y_hat)) == 0.0:
        raise PlcError("SI-SDR is undefined for an all-zero estimate")
    alpha = si_sdr_alpha(ref, est)
    target = alpha * y
    target_energy = float(np.dot(target, target))
    d = target - y_hat
    err_energy = float(np.dot(d, d))
    if err_energy == 0.0:
        return float("inf")
    if target_energy == 0.0:
        return float("-inf")  # estimate orthogonal to the reference
    return 10.0 * np.log10(target_energy / err_energy)


def _frame_count(n: int, frame: int, hop: int) -> int:
    if n < frame:
        raise PlcError(f"clip of {n} samples is shorter than one {frame}-sample frame")
    return 1 + (n - frame) // hop


def _spectral_frames(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    """Hann-windowed magnitude spectra, one row per frame (full frames only)."""
    m = _frame_count(len(x), frame, hop)
    window = np.hanning(frame)
    idx = hop * np.arange(m)[:, None] + np.arange(frame)[None, :]
    return np.abs(np.fft.rfft(x[idx] * window, axis=1))


def lsd(ref: Waveform, est: Waveform) -> float:
    """Mean over frames of the RMS log10-power difference across all bins."""
    y, y_hat = _check_pair(ref, est)
    ref_mag = _spectral_frames(y, LSD_FRAME, LSD_HOP)
    est_mag = _spectral_frames(y_hat, LSD_FRAME, LSD_HOP)
    diff = 2.0 * (np.log10(np.maximum(ref_mag, MAG_FLOOR)) - np.log10(np.maximum(est_mag, MAG_FLOOR)))
    per_frame = np.sqrt(np.mean(diff * diff, axis=1))
    return float(np.mean(per_frame))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def _mel_filterbank(sample_rate: int, frame: int, n_bands: int) -> np.ndarray:
    """Triangular unit-peak filters on the rfft bin grid, 0 Hz to Nyquist."""
    edges_hz = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate / 2), n_bands + 2))
    bin_freqs = np.fft.rfftfreq(frame, 1.0 / sample_rate)
    fb = np.zeros((n_bands, len(bin_freqs)))
    for b in range(n_bands):
        lo, center, hi = edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        fb[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def _mfcc_frames(x: np.ndarray, sample_rate: int) -> np.ndarray:
    mags = _spectral_frames(x, MCD_FRAME, MCD_HOP)
    fb = _mel_filterbank(sample_rate, MCD_FRAME, MEL_BANDS)
    energies = mags ** 2 @ fb.T
    log_e = np.log(np.maximum(energies, MAG_FLOOR))
    coeffs = dct(log_e, type=2, norm="ortho", axis=1)
    return coeffs[:, 1:MCD_COEFFS + 1]


def mcd(ref: Waveform, est: Waveform) -> float:
    """Mean over frames of the Euclidean distance between MFCC vectors 1..16."""
    y, y_hat = _check_pair(ref, est)
    c_ref = _mfcc_frames(y, ref.sample_rate)
    c_est = _mfcc_frames(y_hat, est.sample_rate)
    return float(np.mean(np.sqrt(np.sum((c_ref - c_est) ** 2, axis=1))))


def evaluate_clip(ref: Waveform, est: Waveform) -> MetricReport:
    """All five metrics on one reference/estimate pair."""
    return MetricReport(
        mse=mse(ref, est),
        sdr_db=sdr(ref, est),
        si_sdr_db=si_sdr(ref, est),
        lsd=lsd(ref, est),
        mcd=mcd(ref, est),
        si_sdr_alpha=si_sdr_alpha(ref, est),
    )
