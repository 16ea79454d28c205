"""Short-time Fourier analysis and weighted overlap-add synthesis.

Framing is deliberately simple: no centering, no zero padding. Frame t
covers samples [t*hop, t*hop + window), so num_frames is
1 + floor((len - window) / hop) and only the fully overlapped interior of
a round trip is reconstructed exactly. Edge frames are a documented
non-invertible region.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioBuffer

_WINDOWS = {}


def _register_window(name):
    def deco(fn):
        _WINDOWS[name] = fn
        return fn
    return deco


@_register_window("hann")
def periodic_hann(length: int) -> np.ndarray:
    n = np.arange(length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)


@_register_window("rect")
def rect_window(length: int) -> np.ndarray:
    return np.ones(length)


def cola_deviation(window: np.ndarray, hop_len: int) -> float:
    """Max deviation of the shifted-window sum from constant on the interior.

    Zero (to float precision) means the window satisfies constant
    overlap-add at this hop.
    """
    length = len(window)
    num_shifts = 3 * (length // hop_len) + 3
    total = np.zeros(length + num_shifts * hop_len)
    for k in range(num_shifts):
        total[k * hop_len:k * hop_len + length] += window
    interior = total[length:-length]
    return float(np.max(np.abs(interior - np.mean(interior))))


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 512
    hop_len: int = 128
    window: str = "hann"
    sample_rate_hz: int = 16000

    def __post_init__(self):
        if not 0 < self.hop_len <= self.window_len:
            raise ValueError(f"need 0 < hop_len <= window_len, got {self.hop_len}/{self.window_len}")
        if self.window not in _WINDOWS:
            raise ValueError(f"unknown window {self.window!r}; choices: {sorted(_WINDOWS)}")
        if cola_deviation(self.window_array(), self.hop_len) > 1e-10:
            raise ValueError(f"window {self.window!r} is not constant-overlap-add at hop {self.hop_len}")

    def window_array(self) -> np.ndarray:
        return _WINDOWS[self.window](self.window_len)

    @property
    def num_bins(self) -> int:
        return self.window_len // 2 + 1

    @property
    def seconds_per_frame(self) -> float:
        return self.hop_len / self.sample_rate_hz

    def num_frames(self, num_samples: int) -> int:
        if num_samples < self.window_len:
            raise ValueError(f"signal of {num_samples} samples is shorter than one {self.window_len}-sample window")
        return 1 + (num_samples - self.window_len) // self.hop_len


@dataclass(frozen=True)
class Spectrogram:
    """One-sided complex time-frequency frames, shape (num_frames, num_bins)."""

    frames: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.complex128)
        if frames.ndim != 2:
            raise ValueError(f"frames must be 2-D, got shape {frames.shape}")
        if frames.shape[1] != self.config.num_bins:
            raise ValueError(
                f"bin count {frames.shape[1]} does not match window {self.config.window_len} "
                f"(expected {self.config.num_bins})"
            )
        if not np.all(np.isfinite(frames.view(np.float64))):
            raise ValueError("spectrogram entries must be finite")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]


def stft(buf: AudioBuffer, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Forward transform: windowed frames, one-sided FFT per frame."""
    x = buf.samples
    num_frames = cfg.num_frames(len(x))
    window = cfg.window_array()
    strides = (cfg.hop_len * x.strides[0], x.strides[0])
    segments = np.lib.stride_tricks.as_strided(x, shape=(num_frames, cfg.window_len), strides=strides)
    frames = np.fft.rfft(segments * window, axis=1)
    return Spectrogram(frames, cfg)


# Edge samples with window coverage below this fraction of full coverage are
# faded out instead of renormalized: dividing by a near-zero coverage sum
# turns frames that are not overlap-consistent (masked spectrograms) into
# huge spurious amplitudes.
NORM_FLOOR_FRACTION = 0.1


def istft(spec: Spectrogram) -> AudioBuffer:
    """Weighted overlap-add inverse; exact on the fully overlapped interior.

    Output length is window + (num_frames - 1) * hop. Edge samples have
    partial window coverage; their normalization is floored, so they fade
    rather than blow up when frames are not mutually consistent.
    """
    cfg = spec.config
    window = cfg.window_array()
    segments = np.fft.irfft(spec.frames, n=cfg.window_len, axis=1)
    out_len = cfg.window_len + (spec.num_frames - 1) * cfg.hop_len
    acc = np.zeros(out_len)
    norm = np.zeros(out_len)
    for t in range(spec.num_frames):
        start = t * cfg.hop_len
        acc[start:start + cfg.window_len] += segments[t] * window
        norm[start:start + cfg.window_len] += window ** 2
    acc /= np.maximum(norm, NORM_FLOOR_FRACTION * np.max(norm))
    return AudioBuffer(acc, cfg.sample_rate_hz)


def interior_slice(cfg: StftConfig, out_len: int) -> slice:
    """Fully overlapped region of an istft output, where reconstruction is exact."""
    edge = cfg.window_len - cfg.hop_len
    return slice(edge, out_len - edge)


def mag_phase(spec: Spectrogram) -> tuple[np.ndarray, np.ndarray]:
    """Split into magnitude >= 0 and phase in (-pi, pi]; zero entries get phase 0."""
    magnitude = np.abs(spec.frames)
    phase = np.angle(spec.frames)
    phase[phase == -np.pi] = np.pi
    phase[magnitude == 0.0] = 0.0
    return magnitude, phase


def from_mag_phase(magnitude: np.ndarray, phase: np.ndarray, cfg: StftConfig) -> Spectrogram:
    return Spectrogram(magnitude * np.exp(1j * phase), cfg)


_MAGIC = b"SPGR"
_VERSION = 1


def spectrogram_to_bytes(spec: Spectrogram) -> bytes:
    """Binary container: header with dims and config, float32 re/im payload."""
    cfg = spec.config
    window_id = cfg.window.encode()
    header = struct.pack(
        "<4sIIIIII",
        _MAGIC,
        _VERSION,
        spec.num_frames,
        spec.num_bins,
        cfg.window_len,
        cfg.hop_len,
        cfg.sample_rate_hz,
    ) + struct.pack("<I", len(window_id)) + window_id
    interleaved = np.empty((spec.num_frames, spec.num_bins, 2), dtype="<f4")
    interleaved[:, :, 0] = spec.frames.real
    interleaved[:, :, 1] = spec.frames.imag
    return header + interleaved.tobytes()


def spectrogram_from_bytes(blob: bytes) -> Spectrogram:
    head_fmt = "<4sIIIIII"
    head_size = struct.calcsize(head_fmt)
    magic, version, num_frames, num_bins, window_len, hop_len, rate = struct.unpack_from(head_fmt, blob)
    if magic != _MAGIC:
        raise ValueError("not a spectrogram container")
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    (name_len,) = struct.unpack_from("<I", blob, head_size)
    offset = head_size + 4
    window = blob[offset:offset + name_len].decode()
    offset += name_len
    cfg = StftConfig(window_len=window_len, hop_len=hop_len, window=window, sample_rate_hz=rate)
    payload = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(num_frames, num_bins, 2)
    frames = payload[:, :, 0].astype(np.float64) + 1j * payload[:, :, 1].astype(np.float64)
    return Spectrogram(frames, cfg)
