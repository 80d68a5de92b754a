"""Strictly causal streaming concealment engine.

Three concealers share the engine: ``zero`` (the anchor), ``repeat`` (repeat
the last good packet), and ``ar`` (high-order linear prediction fitted on the
sliding output context, the signal-processing branch of the challenge
baseline). The AR and repeat concealers predict 256 surplus samples past each
packet and crossfade them into whatever comes next, valid or predicted.

AR fitting uses the autocorrelation method with white-noise compensation.
The lag estimates are computed on a lightly tapered (Tukey 0.2) copy of the
context and normalized per lag by the taper's own autocorrelation: the taper
suppresses edge products and the normalization removes the finite-length lag
bias, which is what limits free-running prediction accuracy on strongly
tonal signals. The Yule-Walker system is then solved by Levinson-Durbin with
a stability guard: if a reflection coefficient leaves (-1, 1), fitting stops
at the last stable order and the remaining coefficients stay zero, so the
synthesis filter is always minimum-phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.signal.windows import tukey

from .audio_io import CHALLENGE_RATE, PACKET_SIZE, Waveform, packet_grid
from .errors import PlcError
from .trace_model import PacketTrace

CONCEALERS = ("zero", "repeat", "ar")

# residual plugin: (context, ar_prediction) -> residual, all of prediction length
ResidualPredictor = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EngineConfig:
    packet_size: int = PACKET_SIZE
    context_packets: int = 8
    ar_order: int = 256
    extra_pred: int = 256
    crossfade_len: int = 256
    noise_comp: float = 1e-3

    def __post_init__(self):
        if self.packet_size < 1 or self.context_packets < 1 or self.ar_order < 1:
            raise PlcError("packet_size, context_packets and ar_order must be positive")
        if self.extra_pred != self.crossfade_len:
            raise PlcError("extra_pred must equal crossfade_len (the surplus exists to crossfade)")
        if not 0 <= self.crossfade_len <= self.packet_size:
            raise PlcError("crossfade_len must lie in [0, packet_size]")
        if 2 * self.ar_order > self.context_len:
            raise PlcError(
                f"ar_order {self.ar_order} too high for a {self.context_len}-sample context"
            )
        if self.noise_comp < 0:
            raise PlcError("noise_comp must be non-negative")

    @property
    def context_len(self) -> int:
        return self.context_packets * self.packet_size

    @property
    def horizon(self) -> int:
        return self.packet_size + self.extra_pred


@dataclass(eq=False)
class PacketEvent:
    index: int
    payload: np.ndarray | None
    lost: bool

    def __post_init__(self):
        if self.lost != (self.payload is None):
            raise PlcError("a packet is lost iff its payload is absent")
        if self.payload is not None:
            self.payload = np.asarray(self.payload, dtype=np.float64)


@dataclass(eq=False)
class ArModel:
    """Fitted linear predictor: coefficients a_1..a_p plus the fit context."""

    coefficients: np.ndarray
    context: np.ndarray
    fitted_order: int

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def predict(self, horizon: int) -> np.ndarray:
        """Free-running extrapolation y[n] = sum_i a_i * y[n-i], seeded from the context."""
        if horizon < 0:
            raise PlcError("horizon must be non-negative")
        p = self.order
        if len(self.context) < p:
            raise PlcError("model context shorter than its order; not a fitted model")
        buf = np.empty(p + horizon)
        buf[:p] = self.context[-p:]
        rev = self.coefficients[::-1]
        for n in range(horizon):
            buf[p + n] = rev @ buf[n:n + p]
        return buf[p:]


@lru_cache(maxsize=16)
def _lag_taper(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    w = tukey(n, 0.2)
    norm = np.array([np.dot(w[: n - k], w[k:]) for k in range(order + 1)])
    return w, norm


def autocorrelate(x: np.ndarray, order: int) -> np.ndarray:
    """Tapered, lag-normalized autocorrelation estimate r[0..order]."""
    n = len(x)
    w, norm = _lag_taper(n, order)
    xw = x * w
    num = np.array([np.dot(xw[: n - k], xw[k:]) for k in range(order + 1)])
    return num / norm


def levinson_durbin(r: np.ndarray, order: int) -> tuple[np.ndarray, int]:
    """Solve the Yule-Walker Toeplitz system; returns (coefficients, stable order).

    Stops early (leaving higher coefficients zero) if a reflection coefficient
    reaches magnitude 1, which keeps the predictor minimum-phase even for
    indefinite lag estimates.
    """
    a = np.zeros(order)
    if r[0] <= 0:
        return a, 0
    prev = np.zeros(order)
    err = r[0]
    for i in range(1, order + 1):
        acc = r[i] - np.dot(prev[:i - 1], r[i - 1:0:-1])
        k = acc / err
        if not np.isfinite(k) or abs(k) >= 1.0:
            return prev.copy(), i - 1
        a[:i - 1] = prev[:i - 1] - k * prev[:i - 1][::-1]
        a[i - 1] = k
        err *= 1.0 - k * k
        prev[:i] = a[:i]
    return a, order


def fit_ar(context: Sequence[float], order: int, noise_comp: float = 1e-3) -> ArModel:
    """Fit an order-p predictor on a context window.

    The zero-lag estimate is inflated by (1 + noise_comp) before the solve
    (white-noise compensation); an all-zero context yields an all-zero model.
    """
    x = np.asarray(context, dtype=np.float64)
    if order < 1:
        raise PlcError("order must be at least 1")
    if len(x) < 2 * order:
        raise PlcError(f"context of {len(x)} samples is too short for order {order}")
    if not np.all(np.isfinite(x)):
        raise PlcError("context contains non-finite samples")
    r = autocorrelate(x, order)
    if r[0] <= 0.0:
        return ArModel(np.zeros(order), x, 0)
    r = r.copy()
    r[0] *= 1.0 + noise_comp
    coeffs, stable = levinson_durbin(r, order)
    return ArModel(coeffs, x, stable)


def crossfade_weights(fade_len: int) -> np.ndarray:
    """Outgoing raised-cosine ramp; the incoming ramp is its complement to 1."""
    n = np.arange(fade_len)
    return np.cos(np.pi * (n + 0.5) / (2 * fade_len)) ** 2


def crossfade(tail: np.ndarray, incoming: np.ndarray, fade_len: int) -> np.ndarray:
    """Blend a pending tail into the next packet over fade_len samples.

    Written so that identical tail and incoming samples pass through exactly.
    """
    if fade_len < 0:
        raise PlcError("fade_len must be non-negative")
    if fade_len > len(tail) or fade_len > len(incoming):
        raise PlcError(f"fade_len {fade_len} exceeds an input ({len(tail)}/{len(incoming)})")
    out = np.array(incoming, dtype=np.float64, copy=True)
    if fade_len:
        w_out = crossfade_weights(fade_len)
        out[:fade_len] += w_out * (tail[:fade_len] - out[:fade_len])
    return out


def _zero_residual(context: np.ndarray, ar_prediction: np.ndarray) -> np.ndarray:
    return np.zeros_like(ar_prediction)


class ConcealmentEngine:
    """Processes one packet stream in order; state after packet k depends only
    on packets 0..k (no look-ahead anywhere)."""

    def __init__(self, config: EngineConfig | None = None, method: str = "ar"):
        if method not in CONCEALERS:
            raise PlcError(f"unknown concealer {method!r}; pick one of {CONCEALERS}")
        self.config = config or EngineConfig()
        self.method = method
        self._residual: ResidualPredictor = _zero_residual
        self._history = np.zeros(self.config.context_len)
        self._emitted = 0
        self._tail: np.ndarray | None = None
        self._in_burst = False
        self._ar_coeffs: np.ndarray | None = None
        self._ar_state: np.ndarray | None = None
        self._ar_context: np.ndarray | None = None
        self._ar_fitted = 0
        self._repeat_src: np.ndarray | None = None
        self._next_index = 0

    def attach_residual(self, predictor: ResidualPredictor) -> None:
        """Plug in a residual predictor added to the AR branch before crossfading."""
        self._residual = predictor

    def push(self, event: PacketEvent) -> np.ndarray:
        """Consume the next packet event and return that packet's output samples."""
        cfg = self.config
        if event.index != self._next_index:
            raise PlcError(f"expected packet {self._next_index}, got {event.index} (out of order?)")
        self._next_index += 1

        if not event.lost:
            if len(event.payload) != cfg.packet_size:
                raise PlcError(f"payload has {len(event.payload)} samples, packet size is {cfg.packet_size}")
            pkt = self._splice(event.payload)
            self._in_burst = False
        else:
            pkt = self._conceal()
        self._history = np.concatenate([self._history, pkt])[-cfg.context_len:]
        self._emitted += len(pkt)
        return pkt

    def _splice(self, packet: np.ndarray) -> np.ndarray:
        if self._tail is None:
            return np.array(packet, dtype=np.float64, copy=True)
        out = crossfade(self._tail, packet, self.config.crossfade_len)
        self._tail = None
        return out

    def _conceal(self) -> np.ndarray:
        cfg = self.config
        if self.method == "zero":
            self._tail = None
            return np.zeros(cfg.packet_size)

        if self.method == "repeat":
            if not self._in_burst:
                self._repeat_src = self._history[-cfg.packet_size:].copy()
            reps = -(-cfg.horizon // cfg.packet_size)
            pred = np.tile(self._repeat_src, reps)[:cfg.horizon]
        else:
            if not self._in_burst:
                # near stream start only the emitted samples carry signal; the
                # pre-stream zeros would bias the fit, so pad only up to the
                # fit minimum
                avail = min(self._emitted, cfg.context_len)
                need = max(avail, 2 * cfg.ar_order)
                self._ar_context = self._history[cfg.context_len - need:].copy()
                model = fit_ar(self._ar_context, cfg.ar_order, cfg.noise_comp)
                self._ar_coeffs = model.coefficients
                self._ar_fitted = model.fitted_order
                self._ar_state = self._history[-cfg.ar_order:].copy()
            seeded = ArModel(self._ar_coeffs, self._ar_state, self._ar_fitted)
            ar_pred = seeded.predict(cfg.horizon)
            # the recursion state advances by one packet; the surplus is a
            # deterministic peek that the next packet will regenerate
            self._ar_state = np.concatenate([self._ar_state, ar_pred[:cfg.packet_size]])[-cfg.ar_order:]
            residual = np.asarray(self._residual(self._ar_context.copy(), ar_pred), dtype=np.float64)
            if residual.shape != (cfg.horizon,):
                raise PlcError(
                    f"residual predictor returned shape {residual.shape}, expected ({cfg.horizon},)"
                )
            pred = ar_pred + residual

        self._in_burst = True
        np.clip(pred, -1.0, 1.0, out=pred)
        pkt = self._splice(pred[:cfg.packet_size])
        self._tail = pred[cfg.packet_size:].copy() if cfg.extra_pred else None
        return pkt


def process_stream(
    events: Iterable[PacketEvent],
    config: EngineConfig | None = None,
    method: str = "ar",
    residual: ResidualPredictor | None = None,
    sample_rate: int = CHALLENGE_RATE,
) -> Waveform:
    """Run a whole event stream through a fresh engine."""
    engine = ConcealmentEngine(config, method)
    if residual is not None:
        engine.attach_residual(residual)
    chunks = [engine.push(ev) for ev in events]
    samples = np.concatenate(chunks) if chunks else np.zeros(0)
    return Waveform(samples, sample_rate)


def events_from_waveform(w: Waveform, trace: PacketTrace, packet_size: int = PACKET_SIZE) -> list[PacketEvent]:
    """Turn a (lossy) waveform plus its trace into engine events; the trailing
    partial packet is not an event and must be handled by the caller."""
    grid = packet_grid(w, packet_size)
    if len(trace) != grid.whole_packets:
        raise PlcError(f"trace covers {len(trace)} packets but clip has {grid.whole_packets}")
    events = []
    for i, lost in enumerate(trace.flags):
        payload = None if lost else w.samples[i * packet_size:(i + 1) * packet_size]
        events.append(PacketEvent(i, payload, bool(lost)))
    return events


def conceal_waveform(
    lossy: Waveform,
    trace: PacketTrace,
    config: EngineConfig | None = None,
    method: str = "ar",
    residual: ResidualPredictor | None = None,
) -> Waveform:
    """Batch concealment of a lossy clip; tail samples pass through verbatim."""
    cfg = config or EngineConfig()
    events = events_from_waveform(lossy, trace, cfg.packet_size)
    out = process_stream(events, cfg, method, residual, lossy.sample_rate)
    tail = lossy.samples[len(trace) * cfg.packet_size:]
    return Waveform(np.concatenate([out.samples, tail]), lossy.sample_rate)
