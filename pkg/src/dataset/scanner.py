"""
Dataset scanner and record loader for the cables directory contract:

    {train,val,test}/RGB/<id>_0001.png
    {train,val,test}/Masks/<id>/<k>.png      one binary submask per DLO
    {train,val,test}/Masks/<id>_mask.png     semantic mask (union of submasks)

Scanning never crashes on a broken record; problems are collected as `Defect`s
on the manifest.
"""

from pathlib import Path
from typing import List, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..core.log import get_logger
from ..core.records import SPLITS, DatasetManifest, InstanceRecord, ManifestEntry
from ..core.utils import ConfigError, Defect, RasterIOError, RecordError

RGB_SUFFIX = "_0001.png"
SEMANTIC_SUFFIX = "_mask.png"
MAX_SUBMASKS = 10
BINARY_THRESHOLD = 127

logger = get_logger("dataset")


def read_rgb(path: Union[str, Path]) -> np.ndarray:
    """
    Read an image as an `H x W x 3` uint8 array.

    Raises:
        RasterIOError: the file is missing or not a decodable image.
    """
    try:
        with Image.open(path) as img:
            img.load()
            return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as e:
        raise RasterIOError(f"Cannot read image {path}: {e}")


def read_mask(path: Union[str, Path]) -> np.ndarray:
    """Read an 8-bit mask and binarize it at 127."""
    try:
        with Image.open(path) as img:
            img.load()
            return np.asarray(img.convert("L")) > BINARY_THRESHOLD
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as e:
        raise RasterIOError(f"Cannot read mask {path}: {e}")


def list_submask_files(mask_dir: Path) -> List[Path]:
    """Submask PNGs of one record, in lexicographic filename order."""
    if mask_dir is None or not mask_dir.is_dir():
        return []
    return sorted((p for p in mask_dir.iterdir() if p.suffix.lower() == ".png"), key=lambda p: p.name)


def scan_dataset(root: Union[str, Path], split: str) -> DatasetManifest:
    """
    Index one split of a dataset.

    Args:
        root: Dataset root holding the split folders.
        split: One of train, val, test.

    Returns:
        DatasetManifest: Entries for every id with an RGB file and a non-empty
        mask folder; orphans and other problems are listed as defects.

    Raises:
        ConfigError: the root or the split directory does not exist.
    """
    root = Path(root)
    if split not in SPLITS:
        raise ConfigError(f"Unknown split '{split}', expected one of {SPLITS}")
    split_dir = root / split
    if not split_dir.is_dir():
        raise ConfigError(f"Missing split directory: {split_dir}")

    manifest = DatasetManifest(root=root, split=split)
    rgb_dir = split_dir / "RGB"
    masks_dir = split_dir / "Masks"

    rgb_files = sorted(rgb_dir.glob(f"*{RGB_SUFFIX}")) if rgb_dir.is_dir() else []
    seen = set()
    for rgb_path in rgb_files:
        record_id = rgb_path.name[: -len(RGB_SUFFIX)]
        seen.add(record_id)
        mask_dir = masks_dir / record_id
        submask_files = list_submask_files(mask_dir)
        if not submask_files:
            manifest.defects.append(
                Defect("RGB image without submasks", record_id, "orphan_rgb", rgb_path)
            )
            continue

        semantic_path = masks_dir / f"{record_id}{SEMANTIC_SUFFIX}"
        if not semantic_path.is_file():
            manifest.defects.append(
                Defect("Semantic mask missing", record_id, "missing_semantic", semantic_path)
            )
            semantic_path = None

        if len(submask_files) > MAX_SUBMASKS:
            manifest.defects.append(
                Defect(
                    f"{len(submask_files)} submasks exceed the dataset maximum of {MAX_SUBMASKS}",
                    record_id,
                    "too_many_submasks",
                    mask_dir,
                )
            )

        manifest.entries.append(
            ManifestEntry(
                id=record_id,
                rgb_path=rgb_path,
                mask_dir=mask_dir,
                semantic_path=semantic_path,
                n_submasks=len(submask_files),
            )
        )

    if masks_dir.is_dir():
        for folder in sorted(p for p in masks_dir.iterdir() if p.is_dir()):
            if folder.name not in seen:
                manifest.defects.append(
                    Defect("Mask folder without RGB image", folder.name, "orphan_masks", folder)
                )

    logger.debug("Scanned %s/%s: %d records, %d defects", root, split, len(manifest), len(manifest.defects))
    return manifest


def load_record(manifest: DatasetManifest, record_id: str) -> InstanceRecord:
    """
    Load one record: the RGB raster, its submasks (lexicographic order,
    binarized at 127) and the semantic mask.

    Raises:
        KeyError: the id is not in the manifest.
        RecordError: unreadable raster, empty submask or resolution mismatch.
    """
    entry = manifest.entry(record_id)
    try:
        image = read_rgb(entry.rgb_path)
    except RasterIOError as e:
        raise RecordError(str(e), record_id, "unreadable", entry.rgb_path)
    size = image.shape[:2]

    files = list_submask_files(entry.mask_dir)
    if len(files) > MAX_SUBMASKS:
        logger.warning("Record %s has %d submasks (dataset maximum is %d)", record_id, len(files), MAX_SUBMASKS)

    submasks = []
    for path in files:
        try:
            mask = read_mask(path)
        except RasterIOError as e:
            raise RecordError(str(e), record_id, "unreadable", path)
        if mask.shape != size:
            raise RecordError(f"Submask {path.name} is {mask.shape}, image is {size}", record_id, "size_mismatch", path)
        if not mask.any():
            raise RecordError(f"Submask {path.name} is empty", record_id, "empty_mask", path)
        submasks.append(mask)

    if entry.semantic_path is not None:
        try:
            semantic = read_mask(entry.semantic_path)
        except RasterIOError as e:
            raise RecordError(str(e), record_id, "unreadable", entry.semantic_path)
        if semantic.shape != size:
            raise RecordError("Semantic mask resolution differs from the image", record_id, "size_mismatch", entry.semantic_path)
    else:
        semantic = np.stack(submasks).any(axis=0)

    return InstanceRecord(id=record_id, image=image, submasks=submasks, semantic_mask=semantic)


def iter_records(manifest: DatasetManifest):
    """Yield every loadable record; broken ones are logged and skipped."""
    for record_id in manifest.ids:
        try:
            yield load_record(manifest, record_id)
        except RecordError as e:
            logger.warning("Skipping %s", e)
