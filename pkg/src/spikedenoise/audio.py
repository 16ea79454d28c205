"""Mono audio buffers, WAV files, and synthetic noisy-speech generation.

Audio is carried as float64 in [-1, 1]; quantization to 16-bit PCM happens
only at the file boundary so the pipeline never double-quantizes.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io.wavfile
import scipy.signal

DEFAULT_SAMPLE_RATE = 16000

# Full-scale for 16-bit PCM: integer 32767 maps to 32767/32768.
_PCM16_SCALE = 32768.0


class WavFormatError(ValueError):
    """Unsupported or malformed WAV payload."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM samples plus their sample rate.

    Samples are kept as float64. Values outside [-1, 1] are legal in-process
    (mixing can overshoot); they are clipped with a warning at WAV write.
    """

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected mono 1-D samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))


@dataclass(frozen=True)
class NoisyTriple:
    """A clean signal, its noise component, and their mix at a known SNR."""

    clean: AudioBuffer
    noise: AudioBuffer
    noisy: AudioBuffer
    snr_db: float

    def __post_init__(self):
        lengths = {len(self.clean), len(self.noise), len(self.noisy)}
        if len(lengths) != 1:
            raise ValueError(f"buffer lengths differ: {sorted(lengths)}")
        rates = {self.clean.sample_rate_hz, self.noise.sample_rate_hz, self.noisy.sample_rate_hz}
        if len(rates) != 1:
            raise ValueError(f"sample rates differ: {sorted(rates)}")


def read_wav(path) -> AudioBuffer:
    """Read a PCM WAV file as a mono AudioBuffer scaled to [-1, 1].

    Supports 16-bit integer and 32-bit float payloads. Multi-channel files
    are reduced to their first channel.
    """
    try:
        rate, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise WavFormatError(f"cannot parse {path}: {exc}") from exc
    if data.size == 0:
        raise WavFormatError(f"{path}: zero-length payload")
    if data.ndim == 2:
        data = data[:, 0]
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported sample format {data.dtype}")
    return AudioBuffer(samples, int(rate))


def write_wav(buf: AudioBuffer, path) -> None:
    """Write a buffer as mono 16-bit PCM.

    Amplitudes outside [-1, 1] are clipped with a warning. Round-tripping
    through read_wav changes each sample by at most one quantization step
    (2**-15).
    """
    if len(buf) == 0:
        raise ValueError("refusing to write an empty buffer")
    samples = buf.samples
    if np.any(np.abs(samples) > 1.0):
        warnings.warn(f"{path}: clipping {int(np.sum(np.abs(samples) > 1.0))} samples to [-1, 1]")
        samples = np.clip(samples, -1.0, 1.0)
    quantized = np.clip(np.rint(samples * _PCM16_SCALE), -32768, 32767).astype(np.int16)
    scipy.io.wavfile.write(path, buf.sample_rate_hz, quantized)


def mix_at_snr(clean: AudioBuffer, noise: AudioBuffer, snr_db: float) -> NoisyTriple:
    """Scale noise so the clean/noise power ratio hits snr_db, then mix.

    The scale is alpha = ||clean|| / (||noise|| * 10**(snr_db/20)); the noisy
    signal is clean + alpha*noise and the stored noise is the scaled one.
    """
    if len(clean) != len(noise):
        raise ValueError(f"length mismatch: clean {len(clean)} vs noise {len(noise)}")
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise ValueError("sample rate mismatch")
    clean_norm = np.linalg.norm(clean.samples)
    noise_norm = np.linalg.norm(noise.samples)
    if clean_norm == 0.0:
        raise ValueError("clean signal has zero energy")
    if noise_norm == 0.0:
        raise ValueError("noise signal has zero energy")
    alpha = clean_norm / (noise_norm * 10.0 ** (snr_db / 20.0))
    scaled_noise = AudioBuffer(alpha * noise.samples, noise.sample_rate_hz)
    noisy = AudioBuffer(clean.samples + scaled_noise.samples, clean.sample_rate_hz)
    return NoisyTriple(clean=clean, noise=scaled_noise, noisy=noisy, snr_db=snr_db)


def _harmonic_clean(rng: np.random.Generator, num_samples: int, rate: int) -> np.ndarray:
    """Speech-like target: a harmonic stack with random on/off envelopes."""
    t = np.arange(num_samples) / rate
    fundamental = rng.uniform(80.0, 300.0)
    num_harmonics = int(rng.integers(3, 9))
    signal = np.zeros(num_samples)
    for k in range(1, num_harmonics + 1):
        amp = rng.uniform(0.4, 1.0) / k
        phase = rng.uniform(0.0, 2.0 * np.pi)
        signal += amp * np.sin(2.0 * np.pi * k * fundamental * t + phase)

    # Random on/off gating, smoothed so the envelope has no clicks. Segments
    # are 50-300 ms; at least one segment is forced on so energy is nonzero.
    envelope = np.zeros(num_samples)
    pos = 0
    any_on = False
    while pos < num_samples:
        seg = int(rng.uniform(0.05, 0.3) * rate)
        on = bool(rng.random() < 0.65)
        envelope[pos:pos + seg] = 1.0 if on else 0.0
        any_on = any_on or on
        pos += seg
    if not any_on:
        envelope[:] = 1.0
    smooth_len = max(1, rate // 100)
    kernel = np.hanning(2 * smooth_len + 1)
    kernel /= kernel.sum()
    envelope = np.convolve(envelope, kernel, mode="same")

    signal *= envelope
    peak = np.max(np.abs(signal))
    if peak == 0.0:
        signal = np.sin(2.0 * np.pi * fundamental * t)
        peak = 1.0
    return 0.4 * signal / peak


def _filtered_noise(rng: np.random.Generator, num_samples: int) -> np.ndarray:
    """Colored noise: white Gaussian through a random one-pole filter.

    The pole sign and strength vary per sample (lowpass, highpass-leaning,
    or near-flat), so noise energy can land anywhere in the spectrum and a
    denoiser cannot get away with suppressing fixed frequency regions.
    """
    white = rng.standard_normal(num_samples)
    kind = rng.random()
    if kind < 0.45:
        pole = rng.uniform(0.3, 0.95)
        shaped = scipy.signal.lfilter([1.0 - pole], [1.0, -pole], white)
    elif kind < 0.75:
        pole = rng.uniform(0.3, 0.95)
        shaped = scipy.signal.lfilter([1.0 - pole], [1.0, pole], white)
    else:
        pole = rng.uniform(0.05, 0.2)
        shaped = scipy.signal.lfilter([1.0 - pole], [1.0, -pole], white)
    peak = np.max(np.abs(shaped))
    return 0.4 * shaped / peak


def synth_dataset(
    count: int,
    duration_s: float,
    snr_range_db: tuple[float, float] = (-5.0, 20.0),
    seed: int = 0,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE,
) -> list[NoisyTriple]:
    """Generate deterministic clean/noise/noisy triples at uniform-random SNRs.

    The output is a pure function of the arguments: the same seed always
    yields bitwise-identical triples.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    low, high = snr_range_db
    if low > high:
        raise ValueError(f"invalid SNR range: [{low}, {high}]")
    num_samples = int(round(duration_s * sample_rate_hz))
    triples = []
    for index in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        clean = _harmonic_clean(rng, num_samples, sample_rate_hz)
        noise = _filtered_noise(rng, num_samples)
        snr_db = float(rng.uniform(low, high))
        triple = mix_at_snr(
            AudioBuffer(clean, sample_rate_hz),
            AudioBuffer(noise, sample_rate_hz),
            snr_db,
        )
        # Joint rescale keeps the SNR while guaranteeing writable amplitudes.
        peak = max(np.max(np.abs(triple.noisy.samples)), np.max(np.abs(triple.clean.samples)))
        if peak > 0.99:
            scale = 0.99 / peak
            triple = NoisyTriple(
                clean=AudioBuffer(triple.clean.samples * scale, sample_rate_hz),
                noise=AudioBuffer(triple.noise.samples * scale, sample_rate_hz),
                noisy=AudioBuffer(triple.noisy.samples * scale, sample_rate_hz),
                snr_db=snr_db,
            )
        triples.append(triple)
    return triples


MANIFEST_FIELDS = ["clean", "noise", "noisy", "snr_db", "seed"]


def write_manifest(path, rows: list[dict]) -> None:
    """Write a dataset manifest: one CSV line per triple."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_manifest(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["snr_db"] = float(row["snr_db"])
        row["seed"] = int(row["seed"])
    return rows
