"""Leaky integrate-and-fire dynamics in float and 16-bit fixed point.

Update order per step: leak, then input, then threshold test. A spiking
neuron resets to the configured value and sits out refractory_steps steps,
during which input is ignored and the membrane is frozen. Fixed-point mode
quantizes every product and accumulation to the Q format and saturates
instead of wrapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LifParams:
    decay: float = 1.0            # membrane retention per step, in [0, 1]
    threshold: float = 1.0
    reset: float = 0.0
    refractory_steps: int = 0

    def __post_init__(self):
        if not 0.0 <= self.decay <= 1.0:
            raise ValueError(f"decay must lie in [0, 1], got {self.decay}")
        if self.threshold <= 0.0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.refractory_steps < 0:
            raise ValueError("refractory_steps must be non-negative")


@dataclass
class LifState:
    membrane: np.ndarray
    refractory_remaining: np.ndarray

    @classmethod
    def zeros(cls, num_neurons: int) -> "LifState":
        return cls(np.zeros(num_neurons), np.zeros(num_neurons, dtype=np.int64))

    def copy(self) -> "LifState":
        return LifState(self.membrane.copy(), self.refractory_remaining.copy())


@dataclass(frozen=True)
class FixedPointFormat:
    """Signed Q format: total_bits wide with frac_bits fractional bits.

    Rounding is to nearest, ties to even; out-of-range values saturate.
    """

    total_bits: int = 16
    frac_bits: int = 8

    def __post_init__(self):
        if not 0 < self.frac_bits < self.total_bits:
            raise ValueError("need 0 < frac_bits < total_bits")

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def max_value(self) -> float:
        return (2 ** (self.total_bits - 1) - 1) * self.step

    @property
    def min_value(self) -> float:
        return -(2 ** (self.total_bits - 1)) * self.step


Q8_8 = FixedPointFormat(total_bits=16, frac_bits=8)


def quantize(x, fmt: FixedPointFormat = Q8_8) -> np.ndarray:
    """Round to the nearest representable value (ties to even), saturating."""
    x = np.asarray(x, dtype=np.float64)
    scale = 2.0 ** fmt.frac_bits
    lo = -(2 ** (fmt.total_bits - 1))
    hi = 2 ** (fmt.total_bits - 1) - 1
    return np.clip(np.rint(x * scale), lo, hi) / scale


def weighted_sum(spikes_in: np.ndarray, weights: np.ndarray, fmt: FixedPointFormat | None = None) -> np.ndarray:
    """Aggregate weighted spike values: output_j = sum_i weights[j, i] * spike_i.

    With a fixed-point format, each product and each running accumulation is
    quantized, mirroring a saturating hardware MAC chain.
    """
    spikes = np.asarray(spikes_in, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != spikes.shape[0]:
        raise ValueError(f"weights {weights.shape} incompatible with {spikes.shape[0]} inputs")
    if fmt is None:
        return weights @ spikes
    acc = np.zeros(weights.shape[0])
    for i in range(weights.shape[1]):
        product = quantize(weights[:, i] * spikes[i], fmt)
        acc = quantize(acc + product, fmt)
    return acc


def lif_step(
    state: LifState,
    weighted_input: np.ndarray,
    p: LifParams,
    fmt: FixedPointFormat | None = None,
) -> tuple[LifState, np.ndarray]:
    """Advance all neurons one step; returns (new state, boolean spike vector)."""
    weighted_input = np.asarray(weighted_input, dtype=np.float64)
    if weighted_input.shape != state.membrane.shape:
        raise ValueError(f"input shape {weighted_input.shape} vs state {state.membrane.shape}")
    if not np.all(np.isfinite(weighted_input)):
        raise ValueError("non-finite input")

    active = state.refractory_remaining == 0
    if fmt is None:
        updated = p.decay * state.membrane + weighted_input
    else:
        updated = quantize(quantize(p.decay * state.membrane, fmt) + quantize(weighted_input, fmt), fmt)

    membrane = np.where(active, updated, state.membrane)
    spikes = active & (membrane >= p.threshold)
    membrane = np.where(spikes, p.reset, membrane)

    refractory = state.refractory_remaining.copy()
    refractory[~active] -= 1
    refractory[spikes] = p.refractory_steps
    return LifState(membrane, refractory), spikes


def run_lif(
    initial: LifState,
    inputs: np.ndarray,
    p: LifParams,
    fmt: FixedPointFormat | None = None,
) -> tuple[LifState, np.ndarray, np.ndarray]:
    """Run a (num_steps, num_neurons) input sequence through lif_step.

    Returns the final state plus spike raster and membrane trajectory, both
    shaped like the input.
    """
    state = initial.copy()
    raster = np.zeros(inputs.shape, dtype=bool)
    trajectory = np.zeros(inputs.shape)
    for t in range(inputs.shape[0]):
        state, spikes = lif_step(state, inputs[t], p, fmt)
        raster[t] = spikes
        trajectory[t] = state.membrane
    return state, raster, trajectory
