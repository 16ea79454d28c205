import numpy as np
import pytest

from spikedenoise.expressivity import (
    NoOutputSpike,
    ReluNet2,
    SpikeRealization,
    TriLinearFn,
    demo_table,
    eval_piecewise,
    eval_relu_form,
    eval_relu_net,
    eval_spike_realization,
    spike_error_sweep,
)


class TestPiecewise:
    def test_left_branch(self):
        assert eval_piecewise(-2.0, TriLinearFn(1.0)) == -2.0

    def test_middle_branch(self):
        assert eval_piecewise(0.0, TriLinearFn(1.0)) == -0.5

    def test_right_branch(self):
        assert eval_piecewise(2.0, TriLinearFn(1.0)) == 0.0

    def test_continuity_at_breakpoints(self):
        for theta in (0.5, 1.0, 3.0):
            f = TriLinearFn(theta)
            assert eval_piecewise(-theta, f) == pytest.approx(-theta)
            assert eval_piecewise(theta, f) == pytest.approx(0.0)

    def test_invalid_theta(self):
        with pytest.raises(ValueError):
            TriLinearFn(0.0)


class TestReluForm:
    def test_hand_values(self):
        f = TriLinearFn(1.0)
        assert eval_relu_form(0.0, f) == -0.5
        assert eval_relu_form(-2.0, f) == -2.0
        assert eval_relu_form(2.0, f) == 0.0

    @pytest.mark.parametrize("theta", [0.5, 1.0, 3.0])
    def test_matches_piecewise_everywhere(self, theta):
        f = TriLinearFn(theta)
        rng = np.random.default_rng(0)
        grid = np.concatenate([
            np.linspace(-5 * theta, 5 * theta, 5000),
            rng.uniform(-5 * theta, 5 * theta, 5000),
            [-theta, theta],
        ])
        assert np.max(np.abs(eval_relu_form(grid, f) - eval_piecewise(grid, f))) <= 1e-12


class TestReluNet:
    def test_transcribed_weights_match(self):
        for theta in (0.5, 1.0, 3.0):
            f = TriLinearFn(theta)
            net = ReluNet2.for_function(f)
            grid = np.linspace(-5 * theta, 5 * theta, 2001)
            assert np.max(np.abs(eval_relu_net(grid, net) - eval_piecewise(grid, f))) <= 1e-12

    def test_zero_weights_constant_zero(self):
        net = ReluNet2((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
        assert np.all(eval_relu_net(np.linspace(-3, 3, 11), net) == 0.0)

    def test_output_scaling_is_linear(self):
        base = ReluNet2.for_function(TriLinearFn(1.0))
        scaled = ReluNet2(base.hidden_weights, base.hidden_biases,
                          (3.0 * base.output_weights[0], 3.0 * base.output_weights[1]))
        grid = np.linspace(-4, 4, 101)
        np.testing.assert_allclose(eval_relu_net(grid, scaled), 3.0 * eval_relu_net(grid, base))


class TestSpikeRealization:
    def test_flat_region_decodes_to_zero(self):
        f = TriLinearFn(1.0)
        r = SpikeRealization.for_function(f, dt=1e-3)
        for x in (1.0, 2.5, 5.0):
            assert abs(eval_spike_realization(x, r, f)) <= 2 * r.dt

    def test_branch_boundary_continuity(self):
        f = TriLinearFn(1.0)
        r = SpikeRealization.for_function(f, dt=1e-3)
        assert eval_spike_realization(-1.0, r, f) == pytest.approx(-1.0, abs=2 * r.dt)

    def test_matches_function_within_tolerance(self):
        f = TriLinearFn(1.0)
        r = SpikeRealization.for_function(f, dt=1e-3)
        grid = np.linspace(-5, 5, 101)
        decoded = eval_spike_realization(grid, r, f)
        assert np.max(np.abs(decoded - eval_piecewise(grid, f))) <= 2 * r.dt

    def test_halving_dt_halves_error(self):
        f = TriLinearFn(1.0)
        errs = spike_error_sweep(f, [1 / 128, 1 / 256])
        assert errs[1] <= 0.5 * errs[0] + 1e-12

    @pytest.mark.parametrize("theta", [0.5, 1.0, 3.0])
    def test_four_point_refinement_monotone(self, theta):
        f = TriLinearFn(theta)
        dts = [theta / 64, theta / 256, theta / 1024, theta / 4096]
        errs = spike_error_sweep(f, dts)
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_out_of_range_rejected(self):
        f = TriLinearFn(1.0)
        r = SpikeRealization.for_function(f, dt=1e-3)
        with pytest.raises(ValueError):
            eval_spike_realization(6.0, r, f)

    def test_no_output_spike_reported(self):
        f = TriLinearFn(1.0)
        r = SpikeRealization(
            input_delays=(9.0, 11.0),
            input_gains=(1.0, 2.0),
            synaptic_weights=(0.0, 0.0),
            bias_current=1e-9,       # no drive: threshold unreachable
            output_threshold=10.0,
            decode_offset=10.0,
            dt=1e-2,
        )
        with pytest.raises(NoOutputSpike):
            eval_spike_realization(0.0, r, f)


class TestDemoTable:
    def test_columns_agree(self):
        f = TriLinearFn(1.0)
        rows = demo_table(f, dt=1e-3)
        for x, exact, relu, snn in rows:
            assert relu == pytest.approx(exact, abs=1e-12)
            assert snn == pytest.approx(exact, abs=2e-3)
