"""Trainable denoiser: transformer trunk with spiking attention and an
SNN encode/LIF/decode stage, predicting a sigmoid magnitude mask.

The forward path mirrors the processing chain: log-magnitude features are
embedded with sinusoidal positions, run through standard attention layers,
refined by spike-based stages, and reduced to a per-bin mask in [0, 1]
applied to the noisy magnitude with phase passed through.

Spike sampling draws its thresholds from the same counter-based hash as
the spike codecs, keyed by (seed, neuron, step), so a forward pass is a
pure function of its inputs and seed regardless of evaluation order.
Training minimizes negative SI-SNR of the time-domain reconstruction with
fast-sigmoid surrogate gradients through every spike threshold.
"""

from __future__ import annotations

import io
import json
import struct
import threading
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .audio import AudioBuffer, NoisyTriple
from .dsp import Spectrogram, StftConfig, mag_phase, stft
from .neuron import LifParams, LifState, run_lif
from .perf import PerfConfig
from .spike_coding import CodecParams, SpikeTrain, counter_uniform
from .spike_coding import decode as codec_decode
from .spike_coding import encode as codec_encode

SURROGATE_SLOPE = 10.0  # fast-sigmoid sharpness for d(spike)/d(membrane)


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 257
    embed_dim: int = 64
    num_heads: int = 4
    num_layers: int = 2
    snn_neurons: int = 64
    snn_steps: int = 16
    lif: LifParams = field(default_factory=lambda: LifParams(decay=0.9, threshold=0.5))
    codec_scheme: str = "rate"
    seed: int = 0
    ffn_hidden: int = 128
    delay_frames: int = 0
    positional: bool = True
    spiking: bool = True            # False: smooth submodel (expected rates, no sampling)
    snn_recurrent: bool = True      # LIF dynamics between SNN encode and decode
    include_transformer: bool = True
    include_spiking_attention: bool = True
    include_snn: bool = True

    def __post_init__(self):
        if self.embed_dim % self.num_heads != 0:
            raise ValueError("embed_dim must be divisible by num_heads")
        for name in ("input_dim", "embed_dim", "num_heads", "snn_neurons", "snn_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.codec_scheme not in ("rate", "ttfs"):
            raise ValueError("model codec must be 'rate' or 'ttfs'")

    def codec_params(self) -> CodecParams:
        return CodecParams(self.codec_scheme, num_steps=self.snn_steps, seed=self.seed)


def _check_shape(x: torch.Tensor, expected_last: int, what: str):
    if x.ndim != 2 or x.shape[1] != expected_last:
        raise ValueError(f"{what}: expected (frames, {expected_last}), got {tuple(x.shape)}")


class MacCounter:
    """Thread-safe multiply-accumulate tally, bucketed by pipeline stage."""

    def __init__(self):
        self._lock = threading.Lock()
        self.enabled = False
        self.stages: dict[str, int] = {}

    def add(self, stage: str, count: int):
        if self.enabled:
            with self._lock:
                self.stages[stage] = self.stages.get(stage, 0) + int(count)

    def reset(self):
        with self._lock:
            self.stages = {}

    def total(self) -> int:
        return sum(self.stages.values())


class _SpikeFn(torch.autograd.Function):
    """Hard threshold with a fast-sigmoid surrogate derivative."""

    @staticmethod
    def forward(ctx, drive):
        ctx.save_for_backward(drive)
        return (drive >= 0).to(drive.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        (drive,) = ctx.saved_tensors
        surrogate = 1.0 / (1.0 + SURROGATE_SLOPE * drive.abs()) ** 2
        return grad_output * surrogate


def spike_threshold(drive: torch.Tensor) -> torch.Tensor:
    return _SpikeFn.apply(drive)


def _stage_thresholds(seed: int, stage_id: int, step_key: int,
                      t_sim: int, numel: int) -> np.ndarray:
    """Uniform (t_sim, numel) thresholds from the counter hash; pure function."""
    neuron = np.arange(numel, dtype=np.uint64)
    grid_t, grid_n = np.meshgrid(np.arange(t_sim, dtype=np.uint64), neuron, indexing="ij")
    mixed_seed = (seed * 0x9E3779B9 + stage_id * 0x85EBCA6B + step_key * 0xC2B2AE35) & 0xFFFFFFFFFFFFFFFF
    return counter_uniform(mixed_seed, grid_n, grid_t)


def sample_spikes(rates: torch.Tensor, t_sim: int, seed: int, stage_id: int,
                  step_key: int) -> torch.Tensor:
    """Bernoulli spike tensor (t_sim, *rates.shape) with surrogate gradients.

    Forward: spike iff rate exceeds the per-(neuron, step) threshold.
    Backward: fast-sigmoid surrogate of the threshold comparison.
    """
    u = _stage_thresholds(seed, stage_id, step_key, t_sim, rates.numel())
    thresholds = torch.from_numpy(u.reshape(t_sim, *rates.shape)).to(rates.dtype)
    return spike_threshold(rates.unsqueeze(0) - thresholds)


def sinusoidal_positions(num_frames: int, dim: int, dtype=torch.float32) -> torch.Tensor:
    """Standard sin/cos table: channel 2k is sin(p / 10000^(2k/dim))."""
    position = torch.arange(num_frames, dtype=dtype).unsqueeze(1)
    two_k = torch.arange(0, dim, 2, dtype=dtype)
    rates = torch.pow(torch.tensor(10000.0, dtype=dtype), -two_k / dim)
    table = torch.zeros(num_frames, dim, dtype=dtype)
    table[:, 0::2] = torch.sin(position * rates)
    table[:, 1::2] = torch.cos(position * rates[: dim // 2])
    return table


class Embedding(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.proj = nn.Linear(cfg.input_dim, cfg.embed_dim)

    def forward(self, frames: torch.Tensor, counter: MacCounter) -> torch.Tensor:
        _check_shape(frames, self.cfg.input_dim, "embed input")
        counter.add("embedding", frames.shape[0] * self.cfg.input_dim * self.cfg.embed_dim)
        out = self.proj(frames)
        if self.cfg.positional:
            out = out + sinusoidal_positions(out.shape[0], out.shape[1], out.dtype)
        return out


def multi_head_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor,
                         num_heads: int) -> torch.Tensor:
    """Scaled dot-product attention over heads; inputs are (frames, dim)."""
    q_frames, dim = q.shape
    kv_frames = k.shape[0]
    head_dim = dim // num_heads
    qh = q.view(q_frames, num_heads, head_dim).transpose(0, 1)
    kh = k.view(kv_frames, num_heads, head_dim).transpose(0, 1)
    vh = v.view(kv_frames, num_heads, head_dim).transpose(0, 1)
    logits = qh @ kh.transpose(1, 2) / head_dim ** 0.5
    if not torch.isfinite(logits).all():
        raise FloatingPointError("non-finite attention logits")
    weights = torch.softmax(logits, dim=-1)
    out = weights @ vh
    return out.transpose(0, 1).reshape(q_frames, dim)


class AttentionLayer(nn.Module):
    """Pre-projection multi-head attention with a GELU feed-forward block."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        dim = cfg.embed_dim
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.norm_attn = nn.LayerNorm(dim)
        self.norm_ffn = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(
            nn.Linear(dim, cfg.ffn_hidden), nn.GELU(), nn.Linear(cfg.ffn_hidden, dim)
        )

    def forward(self, x: torch.Tensor, counter: MacCounter) -> torch.Tensor:
        frames, dim = x.shape
        counter.add("attention_projections", 4 * frames * dim * dim)
        counter.add("attention_scores", 2 * frames * frames * dim)
        counter.add("ffn", 2 * frames * dim * self.cfg.ffn_hidden)
        attended = multi_head_attention(self.q_proj(x), self.k_proj(x), self.v_proj(x),
                                        self.cfg.num_heads)
        x = self.norm_attn(x + self.out_proj(attended))
        return self.norm_ffn(x + self.ffn(x))


class SpikingAttention(nn.Module):
    """Attention scored by spike coincidences.

    Q/K/V projections are squashed to firing rates, sampled into spike
    trains over snn_steps, and the score matrix accumulates per-step
    coincidences normalized by the step count. Softmaxed scores weight the
    rate-decoded V spikes. In smooth mode the expected rates stand in for
    the sampled trains, which leaves the expectation unchanged.
    """

    STAGE_Q, STAGE_K, STAGE_V = 11, 12, 13

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        dim = cfg.embed_dim
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def coincidence(self, x: torch.Tensor, counter: MacCounter, step_key: int) -> tuple:
        frames, dim = x.shape
        t_sim = self.cfg.snn_steps
        counter.add("spiking_attention_projections", 4 * frames * dim * dim)
        q_rate = torch.sigmoid(self.q_proj(x))
        k_rate = torch.sigmoid(self.k_proj(x))
        v_rate = torch.sigmoid(self.v_proj(x))
        if not self.cfg.spiking:
            counter.add("spiking_attention_scores", frames * frames * dim)
            return q_rate @ k_rate.T, v_rate
        seed = self.cfg.seed
        q_spk = sample_spikes(q_rate, t_sim, seed, self.STAGE_Q, step_key)
        k_spk = sample_spikes(k_rate, t_sim, seed, self.STAGE_K, step_key)
        v_spk = sample_spikes(v_rate, t_sim, seed, self.STAGE_V, step_key)
        counter.add("spiking_attention_scores", t_sim * frames * frames * dim)
        scores = torch.einsum("tfd,tgd->fg", q_spk, k_spk) / t_sim
        return scores, v_spk.mean(dim=0)

    def forward(self, x: torch.Tensor, counter: MacCounter, step_key: int) -> torch.Tensor:
        scores, values = self.coincidence(x, counter, step_key)
        frames, dim = x.shape
        weights = torch.softmax(scores, dim=-1)
        counter.add("spiking_attention_scores", frames * frames * dim)
        return self.out_proj(weights @ values)


class SnnStage(nn.Module):
    """SNN encode, optional LIF recurrence, and rate decode around a bottleneck."""

    STAGE_ENC = 21

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.in_proj = nn.Linear(cfg.embed_dim, cfg.snn_neurons)
        self.out_proj = nn.Linear(cfg.snn_neurons, cfg.embed_dim)

    def forward(self, x: torch.Tensor, counter: MacCounter, step_key: int) -> torch.Tensor:
        frames, dim = x.shape
        cfg = self.cfg
        counter.add("snn_io", frames * dim * cfg.snn_neurons)
        rates = torch.sigmoid(self.in_proj(x))
        if not cfg.spiking:
            # Smooth submodel: expected rates pass straight through with no
            # threshold nonlinearity anywhere (the recurrence is bypassed).
            counter.add("snn_io", frames * cfg.snn_neurons * dim)
            return self.out_proj(rates)
        spikes = sample_spikes(rates, cfg.snn_steps, cfg.seed, self.STAGE_ENC, step_key)
        if cfg.snn_recurrent:
            counter.add("snn", frames * cfg.snn_neurons * cfg.snn_steps)
            decay = cfg.lif.decay
            threshold = cfg.lif.threshold
            membrane = torch.zeros_like(rates)
            fired_prev = torch.zeros_like(rates)
            outputs = []
            for t in range(cfg.snn_steps):
                membrane = decay * membrane * (1.0 - fired_prev) + spikes[t]
                fired = spike_threshold(membrane - threshold)
                outputs.append(fired)
                fired_prev = fired
            decoded = torch.stack(outputs).mean(dim=0)
        else:
            decoded = spikes.mean(dim=0)
        counter.add("snn_io", frames * cfg.snn_neurons * dim)
        return self.out_proj(decoded)


class Denoiser(nn.Module):
    """Full mask-predicting network over log-magnitude features."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        torch.manual_seed(cfg.seed)
        self.embed = Embedding(cfg)
        self.layers = nn.ModuleList(AttentionLayer(cfg) for _ in range(cfg.num_layers))
        self.spiking_attention = SpikingAttention(cfg) if cfg.include_spiking_attention else None
        self.norm_spike = nn.LayerNorm(cfg.embed_dim)
        self.snn_stage = SnnStage(cfg) if cfg.include_snn else None
        self.norm_snn = nn.LayerNorm(cfg.embed_dim)
        self.head = nn.Linear(cfg.embed_dim, cfg.input_dim)
        # Per-bin skip from the input features to the mask logits: the
        # embedding bottleneck cannot carry bin-level detail for every bin,
        # so the mask is a learnable per-bin gate modulated by the trunk.
        self.skip_gain = nn.Parameter(torch.ones(cfg.input_dim))
        self.skip_bias = nn.Parameter(torch.zeros(cfg.input_dim))
        self.counter = MacCounter()

    def perf_config(self) -> PerfConfig:
        return PerfConfig(D=self.cfg.input_dim, S=self.cfg.embed_dim, T=self.cfg.num_heads,
                          N=self.cfg.snn_neurons, t_sim=self.cfg.snn_steps)

    def features_to_mask(self, feats: torch.Tensor, step_key: int = 0) -> torch.Tensor:
        _check_shape(feats, self.cfg.input_dim, "features")
        x = self.embed(feats, self.counter)
        if self.cfg.include_transformer:
            for layer in self.layers:
                x = layer(x, self.counter)
        if self.spiking_attention is not None:
            x = self.norm_spike(x + self.spiking_attention(x, self.counter, step_key))
        if self.snn_stage is not None:
            x = self.norm_snn(x + self.snn_stage(x, self.counter, step_key))
        if self.cfg.delay_frames:
            x = torch.roll(x, shifts=self.cfg.delay_frames, dims=0)
            x[: self.cfg.delay_frames] = 0.0
        self.counter.add("output_head", x.shape[0] * self.cfg.embed_dim * self.cfg.input_dim)
        mask = torch.sigmoid(self.head(x) + self.skip_gain * feats + self.skip_bias)
        if not torch.isfinite(mask).all():
            raise FloatingPointError("non-finite activations in mask head")
        return mask

    def mask_for_magnitude(self, magnitude: torch.Tensor, step_key: int = 0) -> torch.Tensor:
        return self.features_to_mask(torch.log1p(magnitude), step_key)

    def forward(self, noisy: Spectrogram, step_key: int = 0) -> Spectrogram:
        """Denoise a spectrogram: masked magnitude, phase passed through."""
        if noisy.num_bins != self.cfg.input_dim:
            raise ValueError(f"spectrogram has {noisy.num_bins} bins, model expects {self.cfg.input_dim}")
        magnitude, phase = mag_phase(noisy)
        dtype = next(self.parameters()).dtype
        mag_t = torch.from_numpy(magnitude).to(dtype)
        with torch.no_grad():
            mask = self.mask_for_magnitude(mag_t, step_key)
        masked = mask.numpy().astype(np.float64) * magnitude
        return Spectrogram(masked * np.exp(1j * phase), noisy.config)

    def count_macs(self, num_frames: int = 1) -> dict[str, int]:
        """Stage-by-stage MAC tally of one real forward over num_frames frames.

        Only multiply-accumulate pairs are counted: matrix products, score
        and value products, and one MAC per neuron-step of LIF recurrence.
        Bias adds, normalizations, and activation functions are free.
        """
        dummy = torch.zeros(num_frames, self.cfg.input_dim, dtype=next(self.parameters()).dtype)
        self.counter.reset()
        self.counter.enabled = True
        try:
            with torch.no_grad():
                self.features_to_mask(dummy)
        finally:
            self.counter.enabled = False
        return dict(self.counter.stages)


# ---------------------------------------------------------------------------
# SNN encode/decode layer contract over the shared codec types


def snn_encode_layer(values: np.ndarray, cfg: ModelConfig) -> SpikeTrain:
    """Encode a (frames, neurons) array in [0, 1] as one flat spike train."""
    values = np.asarray(values, dtype=np.float64)
    flat = values.reshape(-1)
    return codec_encode(flat, cfg.codec_params())


def snn_decode_layer(train: SpikeTrain, cfg: ModelConfig, shape: tuple[int, int]) -> np.ndarray:
    """Invert snn_encode_layer back to a (frames, neurons) array."""
    flat = np.asarray(codec_decode(train, cfg.codec_params()), dtype=np.float64)
    return flat.reshape(shape)


def snn_recurrent_layer(train: SpikeTrain, cfg: ModelConfig) -> SpikeTrain:
    """Run the encoded train through LIF dynamics (the recurrent stage)."""
    dense = train.to_dense()
    inputs = dense.T.astype(np.float64)  # (steps, neurons)
    _, raster, _ = run_lif(LifState.zeros(train.num_neurons), inputs, cfg.lif)
    return SpikeTrain.from_dense(raster.T, train.dt_s)


# ---------------------------------------------------------------------------
# Differentiable reconstruction and loss


def istft_torch(masked_mag: torch.Tensor, phase: torch.Tensor, cfg: StftConfig) -> torch.Tensor:
    """Weighted overlap-add inverse matching dsp.istft, autograd-friendly."""
    dtype = masked_mag.dtype
    window = torch.from_numpy(cfg.window_array()).to(dtype)
    frames = torch.polar(masked_mag.to(torch.float64), phase.to(torch.float64))
    segments = torch.fft.irfft(frames, n=cfg.window_len, dim=1).to(dtype) * window
    num_frames = masked_mag.shape[0]
    out_len = cfg.window_len + (num_frames - 1) * cfg.hop_len
    folded = F.fold(
        segments.T.unsqueeze(0),
        output_size=(1, out_len),
        kernel_size=(1, cfg.window_len),
        stride=(1, cfg.hop_len),
    ).reshape(out_len)
    norm = F.fold(
        (window ** 2).expand(num_frames, -1).T.unsqueeze(0),
        output_size=(1, out_len),
        kernel_size=(1, cfg.window_len),
        stride=(1, cfg.hop_len),
    ).reshape(out_len)
    from .dsp import NORM_FLOOR_FRACTION

    return folded / torch.clamp(norm, min=NORM_FLOOR_FRACTION * float(norm.max()))


def si_snr_loss(estimate: torch.Tensor, reference: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    """Negative SI-SNR in dB; both signals are mean-centered first."""
    est = estimate - estimate.mean()
    ref = reference - reference.mean()
    scale = torch.dot(est, ref) / (torch.dot(ref, ref) + eps)
    target = scale * ref
    noise = est - target
    ratio = (torch.dot(target, target) + eps) / (torch.dot(noise, noise) + eps)
    return -10.0 * torch.log10(ratio)


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainState:
    model: Denoiser
    step: int
    loss_history: list
    log_lines: list
    diverged: bool = False


def _prepare_sample(triple: NoisyTriple, stft_cfg: StftConfig, dtype):
    noisy_spec = stft(triple.noisy, stft_cfg)
    magnitude, phase = mag_phase(noisy_spec)
    out_len = stft_cfg.window_len + (noisy_spec.num_frames - 1) * stft_cfg.hop_len
    edge = stft_cfg.window_len
    return {
        "mag": torch.from_numpy(magnitude).to(dtype),
        "phase": torch.from_numpy(phase).to(dtype),
        "clean": torch.from_numpy(triple.clean.samples[:out_len]).to(dtype),
        "edge": edge,
        "out_len": out_len,
    }


def training_loss(model: Denoiser, sample: dict, stft_cfg: StftConfig, step_key: int) -> torch.Tensor:
    mask = model.mask_for_magnitude(sample["mag"], step_key)
    rebuilt = istft_torch(mask * sample["mag"], sample["phase"], stft_cfg)
    lo, hi = sample["edge"], sample["out_len"] - sample["edge"]
    return si_snr_loss(rebuilt[lo:hi], sample["clean"][lo:hi])


def train(
    dataset,
    cfg: ModelConfig,
    stft_cfg: StftConfig = StftConfig(),
    steps: int = 200,
    lr: float = 0.05,
    momentum: float = 0.9,
    log_path=None,
) -> TrainState:
    """Gradient descent with momentum on negative SI-SNR.

    Samples are visited in a fixed cyclic order, the learning rate decays
    linearly to zero, and all spike thresholds are keyed by (seed, step),
    so the trajectory is reproducible bit for bit at a fixed thread count.
    A non-finite loss aborts and restores the last finite-loss parameters.
    """
    if len(dataset) == 0:
        raise ValueError("empty training dataset")
    torch.set_num_threads(1)
    model = Denoiser(cfg)
    dtype = next(model.parameters()).dtype
    samples = [_prepare_sample(t, stft_cfg, dtype) for t in dataset]
    optimizer = torch.optim.SGD(model.parameters(), lr=lr, momentum=momentum)
    loss_history = []
    log_lines = []
    last_good = {k: v.clone() for k, v in model.state_dict().items()}
    diverged = False
    step = 0
    for step in range(steps):
        for group in optimizer.param_groups:
            group["lr"] = lr * (1.0 - step / steps)
        sample = samples[step % len(samples)]
        optimizer.zero_grad()
        try:
            loss = training_loss(model, sample, stft_cfg, step_key=step + 1)
        except FloatingPointError:
            loss = None
        if loss is None or not torch.isfinite(loss):
            diverged = True
            model.load_state_dict(last_good)
            break
        loss.backward()
        optimizer.step()
        last_good = {k: v.clone() for k, v in model.state_dict().items()}
        loss_value = float(loss.detach())
        loss_history.append(loss_value)
        log_lines.append(f"{step}\t{loss_value:.6f}\t{-loss_value:.6f}")
    if log_path is not None:
        with open(log_path, "w") as fh:
            fh.write("step\tloss\tsi_snr_db\n")
            fh.write("\n".join(log_lines) + ("\n" if log_lines else ""))
    return TrainState(model=model, step=step, loss_history=loss_history,
                      log_lines=log_lines, diverged=diverged)


def denoise_buffer(model: Denoiser, noisy: AudioBuffer, stft_cfg: StftConfig = StftConfig()) -> AudioBuffer:
    """STFT, mask, ISTFT; output has the input's length.

    The leading and trailing window-length regions lack full overlap
    coverage, so the noisy input is crossfaded back in there instead of
    trusting the faded reconstruction.
    """
    from .dsp import istft

    spec = stft(noisy, stft_cfg)
    cleaned = istft(model(spec))
    out = noisy.samples.copy()
    n = min(len(noisy), len(cleaned))
    weight = np.ones(n)
    edge = min(stft_cfg.window_len, n // 2)
    weight[:edge] = np.linspace(0.0, 1.0, edge)
    weight[n - edge:] = np.linspace(1.0, 0.0, edge)
    out[:n] = weight * cleaned.samples[:n] + (1.0 - weight) * noisy.samples[:n]
    return AudioBuffer(out, noisy.sample_rate_hz)


# ---------------------------------------------------------------------------
# Checkpoint container: versioned binary with config echo and named arrays

_CKPT_MAGIC = b"SDCK"
_CKPT_VERSION = 1


def _config_to_dict(cfg: ModelConfig) -> dict:
    d = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__ if k != "lif"}
    d["lif"] = {
        "decay": cfg.lif.decay,
        "threshold": cfg.lif.threshold,
        "reset": cfg.lif.reset,
        "refractory_steps": cfg.lif.refractory_steps,
    }
    return d


def _config_from_dict(d: dict) -> ModelConfig:
    d = dict(d)
    d["lif"] = LifParams(**d["lif"])
    return ModelConfig(**d)


def save_checkpoint(model: Denoiser, path) -> None:
    blob = io.BytesIO()
    blob.write(_CKPT_MAGIC)
    blob.write(struct.pack("<I", _CKPT_VERSION))
    config_bytes = json.dumps(_config_to_dict(model.cfg)).encode()
    blob.write(struct.pack("<I", len(config_bytes)))
    blob.write(config_bytes)
    state = model.state_dict()
    blob.write(struct.pack("<I", len(state)))
    for name, tensor in state.items():
        name_bytes = name.encode()
        array = tensor.detach().cpu().numpy().astype("<f4")
        blob.write(struct.pack("<I", len(name_bytes)))
        blob.write(name_bytes)
        blob.write(struct.pack("<I", array.ndim))
        blob.write(struct.pack(f"<{array.ndim}I", *array.shape))
        blob.write(array.tobytes())
    with open(path, "wb") as fh:
        fh.write(blob.getvalue())


def load_checkpoint(path) -> Denoiser:
    raw = open(path, "rb").read()
    if raw[:4] != _CKPT_MAGIC:
        raise ValueError("not a checkpoint file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != _CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    offset = 8
    (config_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    cfg = _config_from_dict(json.loads(raw[offset:offset + config_len]))
    offset += config_len
    (num_arrays,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    state = {}
    for _ in range(num_arrays):
        (name_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        name = raw[offset:offset + name_len].decode()
        offset += name_len
        (ndim,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        array = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        offset += 4 * count
        state[name] = torch.from_numpy(array.copy())
    model = Denoiser(cfg)
    model.load_state_dict(state)
    return model
