import numpy as np
import pytest

from stylelook import image
from stylelook.finisher import (
    DissolveCurve,
    FinishSpec,
    dissolve_weight,
    finish_frame,
    finish_sequence,
)


def noise(h, w, seed=0):
    return np.random.default_rng(seed).uniform(0, 1, (h, w, 3))


class TestFinishFrame:
    def test_delivery_width_2048(self):
        out = finish_frame(noise(16, 1024), FinishSpec(delivery_width=2048))
        assert out.shape[1] == 2048
        assert out.shape[0] % 2 == 0

    def test_identity_when_no_work(self):
        img = noise(8, 8, 1)
        out = finish_frame(img, FinishSpec(delivery_width=8, denoise_sigma=0.0))
        assert np.array_equal(out, img)

    def test_constant_stays_constant(self):
        img = np.full((8, 16, 3), 0.6)
        out = finish_frame(img, FinishSpec(delivery_width=32))
        assert out.shape[1] == 32
        assert np.allclose(out, 0.6)

    def test_delivery_smaller_than_source(self):
        with pytest.raises(ValueError):
            finish_frame(noise(8, 64), FinishSpec(delivery_width=32))

    def test_reduces_hf_vs_plain_upscale(self):
        img = noise(16, 32, 2)
        spec = FinishSpec(delivery_width=64, denoise_sigma=1.0)
        finished = finish_frame(img, spec)
        plain = image.resize(img, 64, finished.shape[0])
        assert image.hf_energy(finished, 1.0) < image.hf_energy(plain, 1.0)


class TestDissolveWeight:
    curve = DissolveCurve(10, 20, 40, 50)

    def test_before_in_start(self):
        assert dissolve_weight(5, self.curve) == 0.0

    def test_ramp_midpoint(self):
        assert dissolve_weight(15, self.curve) == 0.5

    def test_plateau(self):
        assert dissolve_weight(30, self.curve) == 1.0

    def test_out_ramp_and_after(self):
        assert dissolve_weight(45, self.curve) == 0.5
        assert dissolve_weight(55, self.curve) == 0.0

    def test_bounded_and_continuous(self):
        weights = [dissolve_weight(f, self.curve) for f in range(0, 60)]
        assert all(0.0 <= w <= 1.0 for w in weights)
        # ramps are 10 frames long: adjacent frames differ by at most 1/10
        assert max(abs(b - a) for a, b in zip(weights, weights[1:])) <= 0.1 + 1e-12

    def test_bad_ordering(self):
        with pytest.raises(ValueError):
            DissolveCurve(5, 4, 6, 7)


class TestFinishSequence:
    def test_weight_zero_returns_originals(self):
        curve = DissolveCurve(100, 110, 120, 130)
        spec = FinishSpec(delivery_width=16, denoise_sigma=0.0, dissolve=curve)
        sty = [noise(8, 16, i) for i in range(3)]
        orig = [noise(8, 16, 10 + i) for i in range(3)]
        out = finish_sequence(sty, orig, spec)
        for o, expect in zip(out, orig):
            assert np.array_equal(o, expect)

    def test_weight_one_returns_finished(self):
        spec = FinishSpec(delivery_width=16, denoise_sigma=0.0,
                          dissolve=DissolveCurve(0, 0, 100, 100))
        sty = [noise(8, 16, i) for i in range(2)]
        orig = [noise(8, 16, 20 + i) for i in range(2)]
        out = finish_sequence(sty, orig, spec)
        for o, s in zip(out, sty):
            assert np.array_equal(o, finish_frame(s, spec))

    def test_single_frame_plateau(self):
        spec = FinishSpec(delivery_width=32, denoise_sigma=0.5,
                          dissolve=DissolveCurve(0, 0, 10, 10))
        sty = [noise(8, 16, 3)]
        orig = [noise(16, 32, 4)]
        out = finish_sequence(sty, orig, spec, start_frame=5)
        assert np.array_equal(out[0], finish_frame(sty[0], spec))

    def test_count_mismatch(self):
        spec = FinishSpec(delivery_width=16)
        with pytest.raises(ValueError):
            finish_sequence([noise(8, 16)], [], spec)

    def test_values_stay_in_unit_interval(self):
        spec = FinishSpec(delivery_width=32, dissolve=DissolveCurve(0, 2, 3, 5))
        sty = [noise(8, 16, i) for i in range(5)]
        orig = [noise(16, 32, 30 + i) for i in range(5)]
        for o in finish_sequence(sty, orig, spec):
            assert o.min() >= 0.0 and o.max() <= 1.0
