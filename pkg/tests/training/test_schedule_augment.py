"""
Schedule and Augmentation Tests
-------------------------------
Warm-up + cosine learning rates and the photometric augmentations.
"""

import numpy as np
import pytest

from src.core.config import AugmentConfig, TrainConfig
from src.training import augment, lr_at, random_patch, step_epoch, step_rng


class TestSchedule:
    def setup_method(self):
        self.cfg = TrainConfig()

    def test_reference_points(self):
        """Peak after warm-up, half peak mid-decay, zero at the end."""
        assert lr_at(5, self.cfg) == pytest.approx(8e-4, abs=1e-12)
        assert lr_at(27.5, self.cfg) == pytest.approx(4e-4, abs=1e-12)
        assert lr_at(50, self.cfg) == pytest.approx(0.0, abs=1e-12)

    def test_linear_warmup(self):
        assert lr_at(0, self.cfg) == 0.0
        assert lr_at(2.5, self.cfg) == pytest.approx(4e-4, abs=1e-12)

    def test_monotone_decay(self):
        values = [lr_at(e, self.cfg) for e in np.linspace(5, 50, 91)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_out_of_range_is_clamped(self):
        assert lr_at(-1, self.cfg) == 0.0
        assert lr_at(60, self.cfg) == pytest.approx(0.0, abs=1e-12)

    def test_no_warmup(self):
        cfg = TrainConfig(warmup_epochs=0)
        assert lr_at(0, cfg) == pytest.approx(8e-4)

    def test_step_epoch(self):
        assert step_epoch(3, 1, 4) == 3.25
        assert step_epoch(0, 0, 0) == 0.0


class TestAugment:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.image = rng.integers(0, 256, size=(32, 48, 3), dtype=np.uint8)

    def test_same_step_same_image(self):
        """One (seed, step) pair always yields the same augmented image."""
        cfg = AugmentConfig(p_grayscale=0.5, p_color_jitter=1.0, p_blur=1.0, p_noise=1.0, p_patch=1.0)
        a = augment(self.image, step_rng(3, 17), cfg)
        b = augment(self.image, step_rng(3, 17), cfg)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, augment(self.image, step_rng(3, 18), cfg))

    def test_shape_and_dtype_kept_input_untouched(self):
        before = self.image.copy()
        out = augment(self.image, step_rng(0, 0), AugmentConfig(p_noise=1.0, p_patch=1.0))
        assert out.shape == self.image.shape
        assert out.dtype == np.uint8
        assert np.array_equal(self.image, before)

    def test_disabled_is_a_copy(self):
        out = augment(self.image, step_rng(0, 0), AugmentConfig.disabled())
        assert np.array_equal(out, self.image)
        assert out is not self.image

    def test_zero_probabilities_change_nothing(self):
        cfg = AugmentConfig(p_grayscale=0.0, p_color_jitter=0.0, p_blur=0.0, p_noise=0.0, p_patch=0.0)
        assert np.array_equal(augment(self.image, step_rng(1, 1), cfg), self.image)

    def test_grayscale(self):
        """Forced grayscale leaves three equal channels."""
        cfg = AugmentConfig(p_grayscale=1.0, p_color_jitter=0.0, p_blur=0.0, p_noise=0.0, p_patch=0.0)
        out = augment(self.image, step_rng(1, 1), cfg)
        assert np.array_equal(out[..., 0], out[..., 1])
        assert np.array_equal(out[..., 1], out[..., 2])

    def test_patch_only_changes_its_rectangle(self):
        cfg = AugmentConfig(p_grayscale=0.0, p_color_jitter=0.0, p_blur=0.0, p_noise=0.0, p_patch=1.0)
        out = augment(self.image, step_rng(2, 5), cfg)
        changed = np.argwhere((out != self.image).any(axis=-1))
        assert len(changed) > 0
        rows, cols = changed[:, 0], changed[:, 1]
        assert (rows.max() - rows.min() + 1) * (cols.max() - cols.min() + 1) <= 16 * 24

    def test_random_patch_covers_the_fraction(self):
        top, left, bottom, right = random_patch(np.random.default_rng(0), 40, 40, 0.25)
        assert (bottom - top, right - left) == (20, 20)
        assert 0 <= top <= 20 and 0 <= left <= 20
