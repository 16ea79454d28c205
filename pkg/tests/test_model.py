import numpy as np
import pytest
import torch

import spikedenoise.model as M
from spikedenoise.audio import AudioBuffer, NoisyTriple, synth_dataset
from spikedenoise.dsp import Spectrogram, StftConfig, istft, mag_phase, stft
from spikedenoise.metrics import si_snr
from spikedenoise.model import (
    Denoiser,
    MacCounter,
    ModelConfig,
    SpikingAttention,
    istft_torch,
    load_checkpoint,
    multi_head_attention,
    sample_spikes,
    save_checkpoint,
    si_snr_loss,
    sinusoidal_positions,
    snn_decode_layer,
    snn_encode_layer,
    snn_recurrent_layer,
    train,
)

torch.set_num_threads(1)
STFT_CFG = StftConfig()


@pytest.fixture(scope="module")
def tiny_triples():
    return synth_dataset(3, 0.4, snr_range_db=(0.0, 10.0), seed=5)


class TestEmbedding:
    def test_zero_input_zero_bias_gives_positions(self):
        cfg = ModelConfig(input_dim=16, embed_dim=8, num_heads=2)
        model = Denoiser(cfg)
        with torch.no_grad():
            model.embed.proj.bias.zero_()
            out = model.embed(torch.zeros(5, 16), MacCounter())
        expected = sinusoidal_positions(5, 8)
        assert torch.equal(out, expected)

    def test_identity_without_positions(self):
        cfg = ModelConfig(input_dim=8, embed_dim=8, num_heads=2, positional=False)
        model = Denoiser(cfg)
        with torch.no_grad():
            model.embed.proj.weight.copy_(torch.eye(8))
            model.embed.proj.bias.zero_()
            x = torch.randn(4, 8)
            assert torch.equal(model.embed(x, MacCounter()), x)

    def test_sinusoid_closed_form(self):
        table = sinusoidal_positions(10, 6)
        for p in range(10):
            for k in range(3):
                expected = np.sin(p / 10000 ** (2 * k / 6))
                assert table[p, 2 * k].item() == pytest.approx(expected, abs=1e-6)

    def test_shape_checked(self):
        model = Denoiser(ModelConfig(input_dim=16, embed_dim=8, num_heads=2))
        with pytest.raises(ValueError):
            model.embed(torch.zeros(5, 7), MacCounter())


class TestAttention:
    def test_single_position_returns_value_row(self):
        q = torch.randn(1, 8)
        k = torch.randn(1, 8)
        v = torch.randn(1, 8)
        out = multi_head_attention(q, k, v, num_heads=2)
        assert torch.allclose(out, v, atol=1e-6)

    def test_identical_keys_give_uniform_average(self):
        torch.manual_seed(0)
        q = torch.randn(6, 8)
        k = torch.randn(1, 8).expand(6, 8)
        v = torch.randn(6, 8)
        out = multi_head_attention(q, k, v, num_heads=2)
        expected = v.mean(dim=0, keepdim=True).expand(6, 8)
        assert torch.allclose(out, expected, atol=1e-6)

    def test_hand_softmax_weights(self):
        # Two keys, one query, one head: logits 0 and ln 3 after scaling
        # give weights 1/4 and 3/4.
        head_dim = 4
        q = torch.zeros(1, head_dim)
        q[0, 0] = 1.0
        k = torch.zeros(2, head_dim)
        k[1, 0] = float(np.log(3.0)) * head_dim ** 0.5
        v = torch.tensor([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
        out = multi_head_attention(q, k, v, num_heads=1)
        assert out[0, 0].item() == pytest.approx(0.25, abs=1e-6)
        assert out[0, 1].item() == pytest.approx(0.75, abs=1e-6)

    def test_softmax_rows_sum_to_one(self):
        torch.manual_seed(1)
        q = torch.randn(7, 8)
        logits = q @ q.T / 2.0
        weights = torch.softmax(logits, dim=-1)
        assert torch.allclose(weights.sum(dim=-1), torch.ones(7), atol=1e-9)

    def test_non_finite_logits_rejected(self):
        q = torch.full((2, 4), 1e30)
        with pytest.raises(FloatingPointError):
            multi_head_attention(q, q, q, num_heads=1)


class TestSpikingAttention:
    def test_expectation_matches_rate_product(self):
        # Coincidence scores over many steps converge to the dot product of
        # the firing-rate vectors (independent Bernoulli draws per step).
        cfg = ModelConfig(seed=0, snn_steps=20000, embed_dim=8, num_heads=2, input_dim=8)
        sa = SpikingAttention(cfg)
        torch.manual_seed(1)
        x = torch.randn(5, 8)
        with torch.no_grad():
            scores, _ = sa.coincidence(x, MacCounter(), step_key=0)
            expected = torch.sigmoid(sa.q_proj(x)) @ torch.sigmoid(sa.k_proj(x)).T
        sigma = (8 * 0.25 / 20000) ** 0.5
        assert float((scores - expected).abs().max()) <= 3 * sigma

    def test_zero_input_uniform_rows(self):
        cfg = ModelConfig(seed=0, embed_dim=8, num_heads=2, input_dim=8, spiking=False)
        sa = SpikingAttention(cfg)
        with torch.no_grad():
            for proj in (sa.q_proj, sa.k_proj, sa.v_proj):
                proj.bias.zero_()
            scores, _ = sa.coincidence(torch.zeros(4, 8), MacCounter(), 0)
        weights = torch.softmax(scores, dim=-1)
        assert torch.allclose(weights, torch.full((4, 4), 0.25), atol=1e-9)

    def test_single_step_saturated_is_binary_outer_product(self):
        cfg = ModelConfig(seed=0, snn_steps=1, embed_dim=8, num_heads=2, input_dim=8)
        sa = SpikingAttention(cfg)
        with torch.no_grad():
            for proj in (sa.q_proj, sa.k_proj, sa.v_proj):
                proj.weight.copy_(torch.eye(8))
                proj.bias.zero_()
            torch.manual_seed(2)
            x = torch.where(torch.rand(4, 8) > 0.5, 50.0, -50.0)
            scores, _ = sa.coincidence(x, MacCounter(), 0)
        binary = (x > 0).float()
        assert torch.equal(scores, binary @ binary.T)

    def test_sampling_is_reproducible(self):
        rates = torch.rand(6, 4)
        a = sample_spikes(rates, 10, seed=3, stage_id=1, step_key=2)
        b = sample_spikes(rates, 10, seed=3, stage_id=1, step_key=2)
        c = sample_spikes(rates, 10, seed=4, stage_id=1, step_key=2)
        assert torch.equal(a, b)
        assert not torch.equal(a, c)


class TestSnnLayers:
    def test_ttfs_roundtrip_quantization(self):
        cfg = ModelConfig(codec_scheme="ttfs", snn_steps=64)
        values = np.random.default_rng(0).uniform(0, 1, (5, 8))
        train_ = snn_encode_layer(values, cfg)
        back = snn_decode_layer(train_, cfg, (5, 8))
        assert np.max(np.abs(back - values)) <= 0.5 / 63 + 1e-12

    def test_rate_roundtrip_binomial_bound(self):
        cfg = ModelConfig(codec_scheme="rate", snn_steps=10000, seed=2)
        values = np.array([[0.1, 0.4], [0.7, 0.9]])
        back = snn_decode_layer(snn_encode_layer(values, cfg), cfg, (2, 2))
        sigma = np.sqrt(values * (1 - values) / 10000)
        assert np.all(np.abs(back - values) <= 3 * sigma + 1e-12)

    def test_zero_tensor(self):
        cfg = ModelConfig(codec_scheme="rate", snn_steps=50)
        back = snn_decode_layer(snn_encode_layer(np.zeros((3, 4)), cfg), cfg, (3, 4))
        assert np.all(back == 0.0)

    def test_recurrent_layer_suppresses_subthreshold(self):
        # All-spikes input with a huge threshold: the LIF stage passes
        # nothing through.
        cfg = ModelConfig(codec_scheme="rate", snn_steps=20,
                          lif=__import__("spikedenoise.neuron", fromlist=["LifParams"]).LifParams(
                              decay=0.5, threshold=1000.0))
        encoded = snn_encode_layer(np.ones((2, 3)), cfg)
        out = snn_recurrent_layer(encoded, cfg)
        assert len(out.events) == 0


class TestForward:
    def make_model(self, **kw):
        return Denoiser(ModelConfig(seed=0, **kw))

    def spec_for(self, triple):
        return stft(triple.noisy, STFT_CFG)

    def test_identity_mask(self, tiny_triples):
        model = self.make_model()
        with torch.no_grad():
            model.head.weight.zero_()
            model.head.bias.fill_(40.0)
            model.skip_gain.zero_()
            model.skip_bias.zero_()
        spec = self.spec_for(tiny_triples[0])
        out = model(spec)
        assert np.max(np.abs(out.frames - spec.frames)) < 1e-9

    def test_zero_mask_silent(self, tiny_triples):
        model = self.make_model()
        with torch.no_grad():
            model.head.weight.zero_()
            model.head.bias.fill_(-40.0)
            model.skip_gain.zero_()
            model.skip_bias.zero_()
        out = model(self.spec_for(tiny_triples[0]))
        assert np.max(np.abs(out.frames)) < 1e-12

    def test_mask_range_and_shape(self, tiny_triples):
        model = self.make_model()
        spec = self.spec_for(tiny_triples[1])
        mag, _ = mag_phase(spec)
        with torch.no_grad():
            mask = model.mask_for_magnitude(torch.from_numpy(mag).float())
        assert mask.shape == (spec.num_frames, spec.num_bins)
        assert float(mask.min()) >= 0.0 and float(mask.max()) <= 1.0
        assert model(spec).frames.shape == spec.frames.shape

    def test_forward_deterministic(self, tiny_triples):
        model = self.make_model()
        spec = self.spec_for(tiny_triples[2])
        assert np.array_equal(model(spec).frames, model(spec).frames)

    def test_bin_mismatch_rejected(self):
        model = self.make_model()
        bad = Spectrogram(np.zeros((4, 129), dtype=complex), StftConfig(window_len=256, hop_len=64))
        with pytest.raises(ValueError):
            model(bad)


class TestMacCounting:
    def test_embedding_exact(self):
        model = Denoiser(ModelConfig(seed=0))
        counts = model.count_macs(1)
        assert counts["embedding"] == 257 * 64

    def test_snn_term_exact_by_difference(self):
        with_rec = Denoiser(ModelConfig(seed=0)).count_macs(1)
        without = Denoiser(ModelConfig(seed=0, snn_recurrent=False)).count_macs(1)
        assert with_rec["snn"] == 64 * 16
        assert "snn" not in without
        assert with_rec["snn"] == sum(with_rec.values()) - sum(without.values())

    def test_zero_stage_model(self):
        cfg = ModelConfig(seed=0, num_layers=0, include_transformer=False,
                          include_spiking_attention=False, include_snn=False)
        counts = Denoiser(cfg).count_macs(1)
        assert set(counts) == {"embedding", "output_head"}

    def test_counts_scale_with_frames(self):
        model = Denoiser(ModelConfig(seed=0))
        one = model.count_macs(1)
        three = model.count_macs(3)
        assert three["embedding"] == 3 * one["embedding"]
        assert three["snn"] == 3 * one["snn"]


class TestReconstruction:
    def test_istft_torch_matches_numpy(self, tiny_triples):
        spec = stft(tiny_triples[0].noisy, STFT_CFG)
        mag, phase = mag_phase(spec)
        ours = istft_torch(torch.from_numpy(mag), torch.from_numpy(phase), STFT_CFG)
        reference = istft(spec).samples
        assert np.max(np.abs(ours.numpy() - reference)) < 1e-10

    def test_si_snr_loss_matches_metric(self):
        rng = np.random.default_rng(0)
        ref = rng.normal(size=1000)
        est = ref + 0.3 * rng.normal(size=1000)
        loss = si_snr_loss(torch.from_numpy(est), torch.from_numpy(ref))
        expected = si_snr(AudioBuffer(est * 0.1), AudioBuffer(ref * 0.1)).value_db
        assert float(-loss) == pytest.approx(expected, abs=1e-5)


class TestTraining:
    def test_zero_lr_keeps_parameters_bitwise(self, tiny_triples):
        cfg = ModelConfig(seed=1)
        initial = Denoiser(cfg)
        reference = {k: v.clone() for k, v in initial.state_dict().items()}
        state = train(tiny_triples, cfg, steps=1, lr=0.0)
        for name, tensor in state.model.state_dict().items():
            assert torch.equal(tensor, reference[name]), name

    def test_overfit_one_strictly_decreases(self, tiny_triples):
        state = train([tiny_triples[0]], ModelConfig(seed=3), steps=10, lr=0.05)
        losses = state.loss_history
        assert len(losses) == 10
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_training_deterministic(self, tiny_triples):
        a = train(tiny_triples, ModelConfig(seed=2), steps=4, lr=0.05)
        b = train(tiny_triples, ModelConfig(seed=2), steps=4, lr=0.05)
        assert a.loss_history == b.loss_history
        for (ka, va), (kb, vb) in zip(a.model.state_dict().items(), b.model.state_dict().items()):
            assert ka == kb and torch.equal(va, vb)

    def test_divergence_aborts_to_last_good(self, tiny_triples):
        # An absurd-amplitude sample overflows the forward pass at step 1;
        # training must stop there and keep the step-0 parameters.
        poison = NoisyTriple(
            clean=AudioBuffer(tiny_triples[1].clean.samples),
            noise=AudioBuffer(tiny_triples[1].noise.samples),
            noisy=AudioBuffer(tiny_triples[1].noisy.samples * 1e155),
            snr_db=0.0,
        )
        state = train([tiny_triples[0], poison], ModelConfig(seed=3), steps=10, lr=0.05)
        assert state.diverged
        assert len(state.loss_history) == 1
        assert all(torch.isfinite(p).all() for p in state.model.parameters())

    def test_gradient_matches_finite_differences(self, tiny_triples):
        cfg = ModelConfig(seed=1, spiking=False)
        model = Denoiser(cfg).double()
        sample = M._prepare_sample(tiny_triples[0], STFT_CFG, torch.float64)

        def loss_fn():
            return M.training_loss(model, sample, STFT_CFG, step_key=0)

        loss_fn().backward()
        params = list(model.parameters())
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = params[int(rng.integers(len(params)))]
            flat = p.detach().reshape(-1)
            idx = int(rng.integers(flat.numel()))
            analytic = p.grad.reshape(-1)[idx].item()
            eps = 1e-6 * max(1.0, abs(flat[idx].item()))
            with torch.no_grad():
                original = flat[idx].item()
                flat[idx] = original + eps
                plus = loss_fn().item()
                flat[idx] = original - eps
                minus = loss_fn().item()
                flat[idx] = original
            fd = (plus - minus) / (2 * eps)
            rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-12)
            assert rel < 1e-4

    def test_log_file_written(self, tiny_triples, tmp_path):
        log = tmp_path / "train.log"
        state = train(tiny_triples, ModelConfig(seed=0), steps=3, lr=0.01, log_path=log)
        lines = log.read_text().strip().splitlines()
        assert lines[0] == "step\tloss\tsi_snr_db"
        assert len(lines) == 1 + 3
        assert len(state.log_lines) == 3


class TestCheckpoint:
    def test_roundtrip_bitwise(self, tiny_triples, tmp_path):
        state = train(tiny_triples, ModelConfig(seed=4), steps=2, lr=0.05)
        path = tmp_path / "model.ckpt"
        save_checkpoint(state.model, path)
        loaded = load_checkpoint(path)
        assert loaded.cfg == state.model.cfg
        for (ka, va), (kb, vb) in zip(state.model.state_dict().items(), loaded.state_dict().items()):
            assert ka == kb
            assert torch.equal(va.float(), vb)

    def test_loaded_model_same_output(self, tiny_triples, tmp_path):
        state = train(tiny_triples, ModelConfig(seed=4), steps=2, lr=0.05)
        path = tmp_path / "model.ckpt"
        save_checkpoint(state.model, path)
        loaded = load_checkpoint(path)
        spec = stft(tiny_triples[0].noisy, STFT_CFG)
        assert np.array_equal(state.model(spec).frames, loaded(spec).frames)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ValueError):
            load_checkpoint(path)


class TestDenoiseBuffer:
    def test_output_length_matches_input(self, tiny_triples):
        model = Denoiser(ModelConfig(seed=0))
        out = M.denoise_buffer(model, tiny_triples[0].noisy, STFT_CFG)
        assert len(out) == len(tiny_triples[0].noisy)
        assert out.sample_rate_hz == tiny_triples[0].noisy.sample_rate_hz
