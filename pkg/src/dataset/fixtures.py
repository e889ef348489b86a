"""
Procedural fixture datasets.

Draws randomly bent thick "cables" (quadratic Bezier strokes) in the four
dataset colors over a noisy background and writes the complete directory tree
(RGB, one submask per cable, semantic mask). Everything is derived from one
seed, so two runs produce byte-identical trees.
"""

from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw

from ..core.log import get_logger
from ..core.records import SPLITS, InstanceRecord
from ..core.utils import ConfigError, RasterIOError
from .scanner import MAX_SUBMASKS, RGB_SUFFIX, SEMANTIC_SUFFIX

CABLE_COLORS = {
    "cyan": (0, 255, 255),
    "white": (255, 255, 255),
    "yellow": (255, 255, 0),
    "black": (0, 0, 0),
}
STROKE_WIDTH = (3, 9)
# cable length and bend relative to the shorter image side
LENGTH_FRACTION = (0.30, 0.55)
MAX_BEND = 0.3
MIN_SIZE = 64
CURVE_SAMPLES = 48

logger = get_logger("dataset")


def _check_arguments(n_images: int, size: Sequence[int], n_curves_range: Sequence[int], stroke_width: Sequence[int] = STROKE_WIDTH):
    h, w = size
    lo, hi = n_curves_range
    if h < MIN_SIZE or w < MIN_SIZE:
        raise ConfigError(f"Fixture size must be at least {MIN_SIZE}x{MIN_SIZE}, got {h}x{w}")
    if not 1 <= lo <= hi <= MAX_SUBMASKS:
        raise ConfigError(f"Curve range must satisfy 1 <= lo <= hi <= {MAX_SUBMASKS}, got ({lo}, {hi})")
    if n_images < 0:
        raise ConfigError("Number of fixture images must be non-negative")
    if not 1 <= stroke_width[0] <= stroke_width[1]:
        raise ConfigError(f"Stroke width range must satisfy 1 <= lo <= hi, got {tuple(stroke_width)}")


def _bezier(p0: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> List[Tuple[float, float]]:
    t = np.linspace(0.0, 1.0, CURVE_SAMPLES)[:, None]
    pts = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t**2 * p2
    return [(float(x), float(y)) for x, y in pts]


def _draw_cable(rng: np.random.Generator, h: int, w: int, stroke_width: Sequence[int] = STROKE_WIDTH) -> np.ndarray:
    """One gently bent cable stroke as a boolean mask; endpoints stay inside the frame."""
    side = min(h, w)
    low = np.array([w, h]) * 0.1
    high = np.array([w, h]) * 0.9
    while True:
        p0 = low + rng.random(2) * (high - low)
        angle = rng.uniform(0.0, 2 * np.pi)
        direction = np.array([np.cos(angle), np.sin(angle)])
        length = rng.uniform(*LENGTH_FRACTION) * side
        p2 = p0 + direction * length
        if np.all(p2 >= low) and np.all(p2 <= high):
            break
    normal = np.array([-direction[1], direction[0]])
    p1 = (p0 + p2) / 2 + normal * rng.uniform(-MAX_BEND, MAX_BEND) * length
    width = int(rng.integers(stroke_width[0], stroke_width[1] + 1))

    canvas = Image.new("L", (w, h), 0)
    ImageDraw.Draw(canvas).line(_bezier(p0, p1, p2), fill=255, width=width, joint="curve")
    return np.asarray(canvas) > 127


def make_fixture_record(
    rng: np.random.Generator,
    record_id: str,
    size: Sequence[int],
    n_curves_range: Sequence[int],
    stroke_width: Sequence[int] = STROKE_WIDTH,
) -> InstanceRecord:
    h, w = size
    lo, hi = n_curves_range
    base = rng.integers(60, 160, size=3)
    noise = rng.normal(0.0, 6.0, size=(h, w, 3))
    image = np.clip(base + noise, 0, 255).astype(np.uint8)

    palette = list(CABLE_COLORS.values())
    submasks = []
    for _ in range(int(rng.integers(lo, hi + 1))):
        stroke = _draw_cable(rng, h, w, stroke_width)
        color = palette[int(rng.integers(len(palette)))]
        image[stroke] = color
        submasks.append(stroke)

    return InstanceRecord(
        id=record_id,
        image=image,
        submasks=submasks,
        semantic_mask=np.stack(submasks).any(axis=0),
    )


def fixture_records(
    seed: int,
    n_images: int,
    size: Sequence[int] = (128, 128),
    n_curves_range: Sequence[int] = (2, 3),
    split: str = "train",
    stroke_width: Sequence[int] = STROKE_WIDTH,
) -> List[InstanceRecord]:
    """The in-memory records `generate_fixture_set` writes for one split."""
    _check_arguments(n_images, size, n_curves_range, stroke_width)
    rng = np.random.default_rng([seed, SPLITS.index(split)])
    return [make_fixture_record(rng, f"{i:05d}", size, n_curves_range, stroke_width) for i in range(n_images)]


def _save(array: np.ndarray, path: Path):
    if array.dtype == bool:
        array = array.astype(np.uint8) * 255
    Image.fromarray(array).save(path, format="PNG")


def write_record(split_dir: Path, record: InstanceRecord):
    rgb_dir = split_dir / "RGB"
    mask_dir = split_dir / "Masks" / record.id
    rgb_dir.mkdir(parents=True, exist_ok=True)
    mask_dir.mkdir(parents=True, exist_ok=True)
    _save(record.image, rgb_dir / f"{record.id}{RGB_SUFFIX}")
    for k, submask in enumerate(record.submasks):
        _save(submask, mask_dir / f"{k:02d}.png")
    _save(record.semantic_mask, split_dir / "Masks" / f"{record.id}{SEMANTIC_SUFFIX}")


def generate_fixture_set(
    target: Union[str, Path],
    seed: int,
    n_images: int,
    size: Sequence[int] = (128, 128),
    n_curves_range: Sequence[int] = (2, 3),
    splits: Sequence[str] = ("train",),
    stroke_width: Sequence[int] = STROKE_WIDTH,
) -> Path:
    """
    Write a fixture dataset under `target`.

    Args:
        target: Dataset root to create (one writer per target).
        seed: Seed for every random choice.
        n_images: Records per split.
        size: Image size `(h, w)`, at least 64x64.
        n_curves_range: Inclusive range of cables per image, `hi <= 10`.
        splits: Splits to emit.
        stroke_width: Inclusive range of cable widths in pixels.

    Returns:
        Path: The dataset root.

    Raises:
        ConfigError: invalid arguments.
        RasterIOError: the target cannot be written.
    """
    target = Path(target)
    for split in splits:
        if split not in SPLITS:
            raise ConfigError(f"Unknown split '{split}'")
    try:
        for split in splits:
            split_dir = target / split
            (split_dir / "RGB").mkdir(parents=True, exist_ok=True)
            (split_dir / "Masks").mkdir(parents=True, exist_ok=True)
            for record in fixture_records(seed, n_images, size, n_curves_range, split, stroke_width):
                write_record(split_dir, record)
    except OSError as e:
        raise RasterIOError(f"Cannot write fixture set to {target}: {e}")

    logger.info("Wrote %d fixture image(s) per split %s to %s (seed %d)", n_images, list(splits), target, seed)
    return target
