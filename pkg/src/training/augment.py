"""
Photometric augmentation of training images.

Key Features:
- Grayscale, color jitter, global Gaussian blur and global Gaussian noise,
  each drawn with its own probability
- Patch-based blur or noise inside a random rectangle covering a fixed share
  of the image
- Geometry is never changed, so the ground-truth masks stay valid
- Fully determined by the numpy generator passed in
"""

from typing import Optional

import numpy as np
from PIL import Image, ImageEnhance, ImageFilter, ImageOps

from ..core.config import AugmentConfig


def step_rng(seed: int, step: int) -> np.random.Generator:
    """Generator of the augmentation draws of one training step."""
    return np.random.default_rng([seed, step])


def grayscale(image: Image.Image) -> Image.Image:
    return ImageOps.grayscale(image).convert("RGB")


def color_jitter(image: Image.Image, rng: np.random.Generator, factor_range) -> Image.Image:
    """Brightness, contrast and saturation, each scaled by a factor drawn from `factor_range`."""
    low, high = factor_range
    for enhancer in (ImageEnhance.Brightness, ImageEnhance.Contrast, ImageEnhance.Color):
        image = enhancer(image).enhance(float(rng.uniform(low, high)))
    return image


def gaussian_blur(image: Image.Image, rng: np.random.Generator, sigma_range) -> Image.Image:
    return image.filter(ImageFilter.GaussianBlur(radius=float(rng.uniform(*sigma_range))))


def gaussian_noise(pixels: np.ndarray, rng: np.random.Generator, sigma: float) -> np.ndarray:
    noisy = pixels.astype(np.float64) + rng.normal(0.0, sigma, size=pixels.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def random_patch(rng: np.random.Generator, h: int, w: int, fraction: float):
    """`(top, left, bottom, right)` of a rectangle covering about `fraction` of the image."""
    ph = max(1, int(round(h * np.sqrt(fraction))))
    pw = max(1, int(round(w * np.sqrt(fraction))))
    top = int(rng.integers(0, h - ph + 1))
    left = int(rng.integers(0, w - pw + 1))
    return top, left, top + ph, left + pw


def _patch(pixels: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    h, w = pixels.shape[:2]
    top, left, bottom, right = random_patch(rng, h, w, cfg.patch_fraction)
    region = np.ascontiguousarray(pixels[top:bottom, left:right])
    if rng.random() < 0.5:
        region = np.asarray(gaussian_blur(Image.fromarray(region), rng, cfg.blur_sigma))
    else:
        region = gaussian_noise(region, rng, cfg.noise_sigma)
    out = pixels.copy()
    out[top:bottom, left:right] = region
    return out


def augment(image: np.ndarray, rng: np.random.Generator, cfg: Optional[AugmentConfig] = None) -> np.ndarray:
    """
    Apply the configured augmentations to one `H x W x 3` uint8 image.

    Every probability is drawn even when the augmentation is skipped, so the
    generator advances the same way whatever the outcome.

    Returns:
        np.ndarray: New uint8 image of the same shape; the input is not modified.
    """
    cfg = cfg or AugmentConfig()
    if not cfg.enabled:
        return image.copy()
    draws = rng.random(5)
    pil = Image.fromarray(image)
    if draws[0] < cfg.p_grayscale:
        pil = grayscale(pil)
    if draws[1] < cfg.p_color_jitter:
        pil = color_jitter(pil, rng, cfg.jitter_range)
    if draws[2] < cfg.p_blur:
        pil = gaussian_blur(pil, rng, cfg.blur_sigma)
    pixels = np.asarray(pil, dtype=np.uint8)
    if draws[3] < cfg.p_noise:
        pixels = gaussian_noise(pixels, rng, cfg.noise_sigma)
    if draws[4] < cfg.p_patch:
        pixels = _patch(pixels, rng, cfg)
    return np.array(pixels, dtype=np.uint8, copy=True)
