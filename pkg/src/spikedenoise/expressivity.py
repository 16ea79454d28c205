"""A tri-linear function realized three ways: closed form, tiny ReLU net,
and a two-input spiking circuit decoded from its output spike time.

The target has slopes 1, 1/2, 0 over three half-open regions split at -theta
and +theta. The spiking realization encodes x as two input spike times with
gains 1 and 2, drives an integrate-to-threshold output neuron with a unit
bias current, and reads the answer off the output firing time:

    t_a = 9*theta + x        (weight 1)
    t_b = 11*theta + 2*x     (weight 1)
    bias current 1, output threshold 10*theta

For x >= theta the neuron crosses threshold on bias alone at time 10*theta;
in the middle region input a is active at the crossing and the firing time
tracks x with slope 1/2; below -theta both inputs are active and the slope
is 1. The decoded value T - 10*theta therefore equals f(x) exactly in
continuous time, and the only error left is spike-time quantization to the
simulation grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NoOutputSpike(RuntimeError):
    """The output neuron never crossed threshold inside the horizon."""


@dataclass(frozen=True)
class TriLinearFn:
    theta: float

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")

    @property
    def coding_range(self) -> tuple[float, float]:
        return (-5.0 * self.theta, 5.0 * self.theta)


def eval_piecewise(x, f: TriLinearFn):
    """Branch definition: x below -theta, (x - theta)/2 between, 0 above."""
    x = np.asarray(x, dtype=np.float64)
    mid = (x - f.theta) / 2.0
    out = np.where(x <= -f.theta, x, np.where(x >= f.theta, 0.0, mid))
    return out if out.ndim else float(out)


def _relu(v):
    return np.maximum(v, 0.0)


def eval_relu_form(x, f: TriLinearFn):
    """Same function as -1/2 relu(-x - theta) - 1/2 relu(-x + theta)."""
    x = np.asarray(x, dtype=np.float64)
    out = -0.5 * _relu(-x - f.theta) - 0.5 * _relu(-x + f.theta)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ReluNet2:
    """Two hidden ReLU units and one linear output unit."""

    hidden_weights: tuple[float, float]
    hidden_biases: tuple[float, float]
    output_weights: tuple[float, float]
    output_bias: float = 0.0

    @classmethod
    def for_function(cls, f: TriLinearFn) -> "ReluNet2":
        return cls(
            hidden_weights=(-1.0, -1.0),
            hidden_biases=(-f.theta, f.theta),
            output_weights=(-0.5, -0.5),
        )


def eval_relu_net(x, net: ReluNet2):
    x = np.asarray(x, dtype=np.float64)
    h0 = _relu(net.hidden_weights[0] * x + net.hidden_biases[0])
    h1 = _relu(net.hidden_weights[1] * x + net.hidden_biases[1])
    out = net.output_weights[0] * h0 + net.output_weights[1] * h1 + net.output_bias
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SpikeRealization:
    input_delays: tuple[float, float]
    input_gains: tuple[float, float]
    synaptic_weights: tuple[float, float]
    bias_current: float
    output_threshold: float
    decode_offset: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @classmethod
    def for_function(cls, f: TriLinearFn, dt: float) -> "SpikeRealization":
        theta = f.theta
        return cls(
            input_delays=(9.0 * theta, 11.0 * theta),
            input_gains=(1.0, 2.0),
            synaptic_weights=(1.0, 1.0),
            bias_current=1.0,
            output_threshold=10.0 * theta,
            decode_offset=10.0 * theta,
            dt=dt,
        )

    def horizon(self, f: TriLinearFn) -> float:
        return 16.0 * f.theta


def eval_spike_realization(x, r: SpikeRealization, f: TriLinearFn):
    """Decode f-hat(x) from the output spike time of the two-input circuit.

    Input spike times are quantized to the simulation grid; the membrane is
    then piecewise linear, so the threshold crossing is interpolated within
    the step where it happens. Raises NoOutputSpike if the horizon passes
    without a crossing.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    lo, hi = f.coding_range
    if np.any((x_arr < lo) | (x_arr > hi)):
        raise ValueError(f"input outside coding range [{lo}, {hi}]")

    dt = r.dt
    num_steps = int(np.ceil(r.horizon(f) / dt)) + 1
    # Arrival step of each input spike: time quantized to the grid.
    arrivals = [
        np.rint((r.input_delays[i] + r.input_gains[i] * x_arr) / dt).astype(np.int64)
        for i in range(2)
    ]
    membrane = np.zeros_like(x_arr)
    fire_time = np.full_like(x_arr, np.nan)
    pending = np.ones(x_arr.shape, dtype=bool)
    for k in range(1, num_steps + 1):
        current = r.bias_current + sum(
            w * (a <= k - 1) for w, a in zip(r.synaptic_weights, arrivals)
        )
        new_membrane = membrane + current * dt
        crossed = pending & (new_membrane >= r.output_threshold)
        if np.any(crossed):
            overshoot = (r.output_threshold - membrane[crossed]) / current[crossed]
            fire_time[crossed] = (k - 1) * dt + overshoot
            pending[crossed] = False
            if not np.any(pending):
                break
        membrane = new_membrane
    if np.any(pending):
        raise NoOutputSpike(f"{int(np.sum(pending))} inputs produced no output spike within the horizon")
    decoded = fire_time - r.decode_offset
    return decoded if np.ndim(x) else float(decoded[0])


def decode_tolerance(r: SpikeRealization) -> float:
    """Worst-case decode error from grid quantization of the two arrivals."""
    return 2.0 * r.dt


def spike_error_sweep(f: TriLinearFn, dts, grid_points: int = 101) -> list[float]:
    """Max |decoded - f| over the coding range, one entry per dt."""
    lo, hi = f.coding_range
    grid = np.linspace(lo, hi, grid_points)
    exact = eval_piecewise(grid, f)
    errors = []
    for dt in dts:
        r = SpikeRealization.for_function(f, dt)
        decoded = eval_spike_realization(grid, r, f)
        errors.append(float(np.max(np.abs(decoded - exact))))
    return errors


def demo_table(f: TriLinearFn, dt: float, grid_points: int = 41) -> list[tuple[float, float, float, float]]:
    """Rows of (x, exact, relu-net, spiking) for plotting or inspection."""
    lo, hi = f.coding_range
    grid = np.linspace(lo, hi, grid_points)
    net = ReluNet2.for_function(f)
    r = SpikeRealization.for_function(f, dt)
    decoded = eval_spike_realization(grid, r, f)
    return [
        (float(x), float(eval_piecewise(x, f)), float(eval_relu_net(x, net)), float(d))
        for x, d in zip(grid, decoded)
    ]
