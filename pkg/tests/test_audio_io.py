import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plc_lab.audio_io import (
    PACKET_SIZE,
    Waveform,
    packet_grid,
    read_wav,
    resample,
    silence_ratio,
    write_wav,
)
from plc_lab.errors import PlcError, WavFormatError


def pcm_to_wav_bytes(pcm, sample_rate=44100, channels=1, bits=16):
    import struct

    payload = np.asarray(pcm, dtype="<i2").tobytes()
    return struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, channels, sample_rate, sample_rate * channels * bits // 8,
        channels * bits // 8, bits,
        b"data", len(payload),
    ) + payload


def tone(freq, seconds=1.0, rate=44100, amp=1.0):
    t = np.arange(round(seconds * rate)) / rate
    return Waveform(amp * np.sin(2 * np.pi * freq * t), rate)


class TestReadWav:
    def test_fixed_point_normalization(self, tmp_path):
        p = tmp_path / "x.wav"
        p.write_bytes(pcm_to_wav_bytes([0, 16384, -32768, 32767]))
        w = read_wav(p)
        assert w.sample_rate == 44100
        np.testing.assert_allclose(w.samples, [0.0, 0.5, -1.0, 32767 / 32768], rtol=0, atol=0)

    def test_stereo_rejected(self, tmp_path):
        p = tmp_path / "stereo.wav"
        p.write_bytes(pcm_to_wav_bytes([0, 0, 0, 0], channels=2))
        with pytest.raises(WavFormatError, match="channel count"):
            read_wav(p)

    def test_wrong_bit_depth_rejected(self, tmp_path):
        p = tmp_path / "x.wav"
        p.write_bytes(pcm_to_wav_bytes([0, 0], bits=8))
        with pytest.raises(WavFormatError, match="bit depth"):
            read_wav(p)

    def test_garbage_rejected(self, tmp_path):
        p = tmp_path / "x.wav"
        p.write_bytes(b"not a wav file at all")
        with pytest.raises(WavFormatError, match="RIFF"):
            read_wav(p)

    def test_truncated_data_chunk_rejected(self, tmp_path):
        p = tmp_path / "x.wav"
        p.write_bytes(pcm_to_wav_bytes([1, 2, 3, 4])[:-3])
        with pytest.raises(WavFormatError):
            read_wav(p)

    @settings(max_examples=25, deadline=None)
    @given(pcm=st.lists(st.integers(min_value=-32768, max_value=32767), min_size=1, max_size=500))
    def test_round_trip_bit_exact(self, tmp_path_factory, pcm):
        p = tmp_path_factory.mktemp("rt") / "x.wav"
        p.write_bytes(pcm_to_wav_bytes(pcm))
        w = read_wav(p)
        q = tmp_path_factory.mktemp("rt") / "y.wav"
        write_wav(w, q)
        assert q.read_bytes() == pcm_to_wav_bytes(pcm)


class TestWriteWav:
    @pytest.mark.parametrize("value,expected", [(0.0, 0), (1.0, 32767), (-1.0, -32768)])
    def test_boundaries(self, tmp_path, value, expected):
        p = tmp_path / "x.wav"
        write_wav(Waveform(np.array([value]), 44100), p)
        assert np.frombuffer(p.read_bytes()[-2:], "<i2")[0] == expected

    def test_round_half_away_from_zero(self, tmp_path):
        p = tmp_path / "x.wav"
        write_wav(Waveform(np.array([0.5 / 32768, -0.5 / 32768, 1.5 / 32768]), 44100), p)
        assert list(np.frombuffer(p.read_bytes()[-6:], "<i2")) == [1, -1, 2]

    def test_out_of_range_rejected(self, tmp_path):
        with pytest.raises(PlcError, match="out of range"):
            write_wav(Waveform(np.array([1.2]), 44100), tmp_path / "x.wav")


class TestPacketGrid:
    @pytest.mark.parametrize("n,whole,tail", [(1024, 2, 0), (511560, 999, 72), (0, 0, 0), (511, 0, 511)])
    def test_partition(self, n, whole, tail):
        g = packet_grid(Waveform(np.zeros(n), 44100))
        assert (g.whole_packets, g.tail_samples) == (whole, tail)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=100_000))
    def test_partition_identity(self, n):
        g = packet_grid(Waveform(np.zeros(n), 44100))
        assert g.whole_packets * PACKET_SIZE + g.tail_samples == n
        assert 0 <= g.tail_samples < PACKET_SIZE


class TestSilenceRatio:
    def test_all_zero(self):
        assert silence_ratio(Waveform(np.zeros(44100), 44100)) == 1.0

    def test_full_scale_tone(self):
        assert silence_ratio(tone(440)) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(PlcError):
            silence_ratio(Waveform(np.zeros(0), 44100))

    def test_half_silence(self):
        # 0.5 s of silence then 0.5 s of tone: ratio 0.5 within one window quantum
        w = tone(440)
        w.samples[:22050] = 0.0
        win, hop = 882, 441
        starts = range(0, len(w) - win + 1, hop)
        oracle = sum(
            1 for s in starts if np.sqrt(np.mean(w.samples[s:s + win] ** 2)) < 1e-3
        ) / len(list(starts))
        r = silence_ratio(w)
        assert r == pytest.approx(oracle)
        assert abs(r - 0.5) <= 2 / len(list(starts))

    def test_monotone_under_zeroing(self):
        rng = np.random.default_rng(0)
        z = Waveform(rng.uniform(-0.5, 0.5, 44100), 44100)
        base = silence_ratio(z)
        for start, stop in [(0, 5000), (10000, 30000), (40000, 44100)]:
            z.samples[start:stop] = 0.0  # cumulative zeroing
            ratio = silence_ratio(z)
            assert ratio >= base
            base = ratio

    def test_short_clip_single_window(self):
        assert silence_ratio(Waveform(np.zeros(100), 44100)) == 1.0
        assert silence_ratio(Waveform(0.5 * np.ones(100), 44100)) == 0.0


class TestResample:
    def test_identity(self):
        w = tone(440, seconds=0.25)
        out = resample(w, 44100)
        np.testing.assert_array_equal(out.samples, w.samples)

    def test_length_contract(self):
        out = resample(Waveform(np.zeros(44100), 44100), 48000)
        assert len(out) == 48000
        assert out.sample_rate == 48000

    def test_tone_level_preserved_to_16k(self):
        w = tone(1000, seconds=1.0, amp=0.8)
        out = resample(w, 16000)
        assert len(out) == 16000
        # FFT-peak oracle on the steady-state region
        seg = out.samples[2000:-2000]
        spec = np.abs(np.fft.rfft(seg * np.hanning(len(seg))))
        freqs = np.fft.rfftfreq(len(seg), 1 / 16000)
        peak = np.argmax(spec)
        assert abs(freqs[peak] - 1000) < 2
        t = np.arange(len(out))[2000:-2000] / 16000
        amp = 2 * np.abs(np.mean(seg * np.exp(-2j * np.pi * 1000 * t)))
        assert abs(20 * np.log10(amp / 0.8)) < 0.1

    def test_round_trip_tone(self):
        w = tone(997, seconds=0.5, amp=0.7)
        back = resample(resample(w, 48000), 44100)
        assert len(back) == len(w)
        # group delay compensated: cross-correlation peaks at zero offset
        a = w.samples[8000:14000]
        cc = [np.dot(back.samples[8000 + d:14000 + d], a) for d in (-2, -1, 0, 1, 2)]
        assert int(np.argmax(cc)) == 2
        t = np.arange(len(w))[4000:-4000] / 44100
        amp = 2 * np.abs(np.mean(back.samples[4000:-4000] * np.exp(-2j * np.pi * 997 * t)))
        assert abs(20 * np.log10(amp / 0.7)) < 0.1

    def test_tone_purity_after_conversion(self):
        w = tone(997, seconds=1.0, amp=0.8)
        out = resample(w, 48000)
        seg = out.samples[8192:-8192]
        spec = np.abs(np.fft.rfft(seg * np.hanning(len(seg)))) ** 2
        peak = np.argmax(spec)
        signal = spec[peak - 30:peak + 31].sum()
        noise = spec.sum() - signal
        assert 10 * np.log10(noise / signal) < -80

    def test_bad_rate_rejected(self):
        with pytest.raises(PlcError):
            resample(tone(440, 0.01), 0)
