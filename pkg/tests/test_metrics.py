import numpy as np
import pytest

from spikedenoise.audio import AudioBuffer
from spikedenoise.metrics import si_snr, summarize


def buf(values):
    return AudioBuffer(np.asarray(values, dtype=float))


class TestSiSnr:
    def test_hand_example_zero_db(self):
        # Projection of [2,0,0,-2] onto [1,-1,1,-1] is the reference itself;
        # residual [1,1,-1,-1] has equal energy, so the ratio is exactly 0 dB.
        result = si_snr(buf([2.0, 0.0, 0.0, -2.0]), buf([1.0, -1.0, 1.0, -1.0]))
        assert result.value_db == pytest.approx(0.0, abs=1e-9)
        assert result.s_target_energy == pytest.approx(4.0)
        assert result.e_noise_energy == pytest.approx(4.0)

    def test_collinear_is_perfect(self):
        rng = np.random.default_rng(0)
        s = rng.normal(size=256)
        for c in (0.5, 1.0, -3.0):
            result = si_snr(buf(c * s), buf(s))
            assert result.perfect
            assert result.value_db is None

    @pytest.mark.parametrize("alpha", [-10.0, 0.1, 1.0, 10.0])
    def test_scale_invariance(self, alpha):
        rng = np.random.default_rng(1)
        s = rng.normal(size=512)
        est = s + 0.3 * rng.normal(size=512)
        base = si_snr(buf(est), buf(s)).value_db
        scaled = si_snr(buf(alpha * est), buf(s)).value_db
        assert scaled == pytest.approx(base, abs=1e-9)

    def test_mean_shift_invariance(self):
        rng = np.random.default_rng(2)
        s = rng.normal(size=512)
        est = s + 0.5 * rng.normal(size=512)
        base = si_snr(buf(est), buf(s)).value_db
        shifted_est = si_snr(buf(est + 3.7), buf(s)).value_db
        shifted_ref = si_snr(buf(est), buf(s + 11.0)).value_db
        assert shifted_est == pytest.approx(base, abs=1e-9)
        assert shifted_ref == pytest.approx(base, abs=1e-9)

    def test_energy_decomposition(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            s = rng.normal(size=300)
            est = rng.normal(size=300)
            result = si_snr(buf(est), buf(s))
            centered = est - est.mean()
            total = np.dot(centered, centered)
            assert result.s_target_energy + result.e_noise_energy == pytest.approx(total, rel=1e-9)

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError):
            si_snr(buf([1.0, 2.0]), buf([5.0, 5.0]))  # constant: zero after centering

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            si_snr(buf([1.0, 2.0]), buf([1.0, 2.0, 3.0]))


class TestSummarize:
    def test_mixed_batch(self):
        rng = np.random.default_rng(4)
        s = rng.normal(size=128)
        results = [
            si_snr(buf(s), buf(s)),                          # perfect
            si_snr(buf(s + rng.normal(size=128)), buf(s)),   # finite
            si_snr(buf(s + rng.normal(size=128)), buf(s)),   # finite
        ]
        summary = summarize(results)
        assert summary.perfect_count == 1
        finite = [r.value_db for r in results if not r.perfect]
        assert summary.mean_db == pytest.approx(np.mean(finite))
        assert summary.per_item_db[0] is None

    def test_all_perfect(self):
        s = np.arange(10.0)
        summary = summarize([si_snr(buf(s), buf(s))])
        assert summary.mean_db is None
        assert summary.perfect_count == 1
