"""Spike codecs: rate, time-to-first-spike, phase, burst, and rank order.

Every encoder produces a SpikeTrain; every decoder inverts its encoder on
the codec's valid domain, exactly for TTFS/phase/burst (up to the stated
time quantization) and statistically for rate. The rate encoder draws its
randomness from a counter-based hash of (seed, neuron, step), so output is
independent of evaluation order and reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCHEMES = ("rate", "ttfs", "phase", "burst", "rank_order")


@dataclass(frozen=True)
class SpikeTrain:
    """Timed binary events for a group of neurons over a simulation window."""

    num_neurons: int
    num_steps: int
    events: frozenset
    dt_s: float = 1e-3

    def __post_init__(self):
        if self.num_neurons < 1 or self.num_steps < 1:
            raise ValueError("num_neurons and num_steps must be >= 1")
        if self.dt_s <= 0:
            raise ValueError("dt_s must be positive")
        events = frozenset((int(n), int(t)) for n, t in self.events)
        for n, t in events:
            if not (0 <= n < self.num_neurons and 0 <= t < self.num_steps):
                raise ValueError(f"event ({n}, {t}) outside [0, {self.num_neurons}) x [0, {self.num_steps})")
        object.__setattr__(self, "events", events)

    def to_dense(self) -> np.ndarray:
        """Boolean (num_neurons, num_steps) raster."""
        dense = np.zeros((self.num_neurons, self.num_steps), dtype=bool)
        for n, t in self.events:
            dense[n, t] = True
        return dense

    @classmethod
    def from_dense(cls, dense: np.ndarray, dt_s: float = 1e-3) -> "SpikeTrain":
        neurons, steps = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], frozenset(zip(neurons.tolist(), steps.tolist())), dt_s)

    def counts(self) -> np.ndarray:
        counts = np.zeros(self.num_neurons, dtype=np.int64)
        for n, _ in self.events:
            counts[n] += 1
        return counts


@dataclass(frozen=True)
class CodecParams:
    scheme: str
    num_steps: int
    dt_s: float = 1e-3
    r_max: float = 1000.0          # rate: max firing rate in Hz
    num_bits: int = 8              # phase
    burst_max_spikes: int = 5      # burst
    isi_min: int = 1               # burst
    isi_max: int = 9               # burst
    seed: int = 0                  # rate

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choices: {SCHEMES}")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if self.r_max <= 0 or self.num_bits <= 0 or self.burst_max_spikes <= 0:
            raise ValueError("scheme parameters must be positive")
        if not 0 < self.isi_min <= self.isi_max:
            raise ValueError("need 0 < isi_min <= isi_max")


# ---------------------------------------------------------------------------
# Counter-based PRNG: splitmix64 finalizer over a mix of (seed, neuron, step).

_U64 = np.uint64


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z + _U64(0x9E3779B97F4A7C15)).astype(_U64)
    z = ((z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)).astype(_U64)
    z = ((z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)).astype(_U64)
    return z ^ (z >> _U64(31))


def counter_uniform(seed: int, neuron: np.ndarray, step: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) keyed by (seed, neuron, step); order-independent."""
    mixed = (
        _U64(seed & 0xFFFFFFFFFFFFFFFF)
        ^ (neuron.astype(_U64) * _U64(0xD1342543DE82EF95))
        ^ (step.astype(_U64) * _U64(0xAF251AF3B0F025B5))
    )
    bits = _splitmix64(mixed)
    return (bits >> _U64(11)).astype(np.float64) * 2.0 ** -53


# ---------------------------------------------------------------------------
# Rate coding


def encode_rate(x: np.ndarray, p: CodecParams) -> SpikeTrain:
    """Poisson-style train: neuron i fires each step with prob x_i*r_max*dt."""
    x = np.asarray(x, dtype=np.float64)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("rate inputs must lie in [0, 1]")
    prob = np.clip(x * p.r_max * p.dt_s, 0.0, 1.0)
    neuron_grid, step_grid = np.meshgrid(np.arange(len(x)), np.arange(p.num_steps), indexing="ij")
    uniform = counter_uniform(p.seed, neuron_grid, step_grid)
    dense = uniform < prob[:, None]
    return SpikeTrain.from_dense(dense, p.dt_s)


def decode_rate(train: SpikeTrain, p: CodecParams) -> np.ndarray:
    """Estimate inputs from firing counts; unbiased, converges as steps grow."""
    return train.counts() / (train.num_steps * p.r_max * p.dt_s)


# ---------------------------------------------------------------------------
# Time-to-first-spike coding


def encode_ttfs(x: np.ndarray, p: CodecParams) -> SpikeTrain:
    """One spike per neuron at step round((1-x)*(num_steps-1)); x=1 fires first."""
    x = np.asarray(x, dtype=np.float64)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("TTFS inputs must lie in [0, 1]")
    if p.num_steps < 2:
        raise ValueError("TTFS needs num_steps >= 2")
    steps = np.rint((1.0 - x) * (p.num_steps - 1)).astype(int)
    events = frozenset((i, int(t)) for i, t in enumerate(steps))
    return SpikeTrain(len(x), p.num_steps, events, p.dt_s)


def decode_ttfs(train: SpikeTrain, p: CodecParams) -> np.ndarray:
    counts = train.counts()
    if np.any(counts != 1):
        bad = np.nonzero(counts != 1)[0]
        raise ValueError(f"TTFS decode expects exactly one spike per neuron; offenders: {bad.tolist()}")
    first = np.zeros(train.num_neurons, dtype=int)
    for n, t in train.events:
        first[n] = t
    return 1.0 - first / (train.num_steps - 1)


# ---------------------------------------------------------------------------
# Phase (binary-weight) coding


def encode_phase(value: int, p: CodecParams) -> SpikeTrain:
    """Spike at step k iff bit (B-1-k) of the value is set, MSB first."""
    if value < 0 or value >= 2 ** p.num_bits:
        raise ValueError(f"value {value} not representable in {p.num_bits} bits")
    if p.num_steps < p.num_bits:
        raise ValueError("num_steps must cover num_bits")
    events = frozenset(
        (0, k) for k in range(p.num_bits) if (value >> (p.num_bits - 1 - k)) & 1
    )
    return SpikeTrain(1, p.num_steps, events, p.dt_s)


def decode_phase(train: SpikeTrain, p: CodecParams) -> int:
    total = 0
    for _, t in train.events:
        if t >= p.num_bits:
            raise ValueError(f"spike at step {t} beyond the {p.num_bits}-bit word")
        total += 2 ** (p.num_bits - 1 - t)
    return total


# ---------------------------------------------------------------------------
# Burst coding


def _burst_shape(x: float, p: CodecParams) -> tuple[int, int]:
    count = 1 + int(round(x * (p.burst_max_spikes - 1)))
    isi = int(round(p.isi_max - x * (p.isi_max - p.isi_min)))
    return count, isi


def encode_burst(x: float, p: CodecParams) -> SpikeTrain:
    """Burst from step 0: spike count grows with x, spacing shrinks with x."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("burst input must lie in [0, 1]")
    count, isi = _burst_shape(x, p)
    last = (count - 1) * isi
    if last >= p.num_steps:
        raise ValueError(f"burst of {count} spikes at ISI {isi} exceeds {p.num_steps} steps")
    events = frozenset((0, k * isi) for k in range(count))
    return SpikeTrain(1, p.num_steps, events, p.dt_s)


def decode_burst(train: SpikeTrain, p: CodecParams) -> float:
    """Invert from spike count; count is integer-exact where ISI quantizes."""
    count = len(train.events)
    if count < 1:
        raise ValueError("burst decode needs at least one spike")
    if p.burst_max_spikes == 1:
        return 0.0
    return (count - 1) / (p.burst_max_spikes - 1)


# ---------------------------------------------------------------------------
# Rank-order coding


def encode_rank_order(x: np.ndarray, p: CodecParams) -> SpikeTrain:
    """Largest input fires at step 0, second largest at step 1, and so on."""
    x = np.asarray(x, dtype=np.float64)
    if len(np.unique(x)) != len(x):
        raise ValueError("rank-order coding requires distinct inputs (ties are rejected)")
    if p.num_steps < len(x):
        raise ValueError(f"num_steps {p.num_steps} cannot order {len(x)} neurons")
    order = np.argsort(-x, kind="stable")
    events = frozenset((int(neuron), step) for step, neuron in enumerate(order))
    return SpikeTrain(len(x), p.num_steps, events, p.dt_s)


def decode_rank_order(train: SpikeTrain, p: CodecParams) -> tuple[int, ...]:
    """Firing order as a permutation of neuron indices."""
    by_step = sorted(train.events, key=lambda e: e[1])
    counts = train.counts()
    if np.any(counts != 1):
        raise ValueError("rank-order decode expects exactly one spike per neuron")
    return tuple(n for n, _ in by_step)


# ---------------------------------------------------------------------------
# Dispatch helpers and serialization

_ENCODERS = {
    "rate": encode_rate,
    "ttfs": encode_ttfs,
    "phase": encode_phase,
    "burst": encode_burst,
    "rank_order": encode_rank_order,
}
_DECODERS = {
    "rate": decode_rate,
    "ttfs": decode_ttfs,
    "phase": decode_phase,
    "burst": decode_burst,
    "rank_order": decode_rank_order,
}


def encode(x, p: CodecParams) -> SpikeTrain:
    return _ENCODERS[p.scheme](x, p)


def decode(train: SpikeTrain, p: CodecParams):
    return _DECODERS[p.scheme](train, p)


def train_to_text(train: SpikeTrain) -> str:
    """Plain-text dump: header lines then one sorted "neuron step" pair per line."""
    lines = [
        f"neurons {train.num_neurons}",
        f"steps {train.num_steps}",
        f"dt {train.dt_s!r}",
    ]
    lines.extend(f"{n} {t}" for n, t in sorted(train.events))
    return "\n".join(lines) + "\n"


def train_from_text(text: str) -> SpikeTrain:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3:
        raise ValueError("truncated spike train dump")
    num_neurons = int(lines[0].split()[1])
    num_steps = int(lines[1].split()[1])
    dt_s = float(lines[2].split()[1])
    events = frozenset(tuple(int(v) for v in ln.split()) for ln in lines[3:])
    return SpikeTrain(num_neurons, num_steps, events, dt_s)
