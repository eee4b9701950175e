# services/ablation_service.py

"""
Ablation Service
Deterministic image manipulations: ellipse-region masking, grayscale
conversion, the resolution ladder and normalized pupil size.

Images are numpy uint8 arrays of shape (height, width, 3).
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from models.image_model import AblationMode, Ellipse, EllipseAnnotation
from utils.exceptions import DataNotFoundError, ValidationError

logger = logging.getLogger(__name__)

MODEL_RESOLUTION = 587
DEFAULT_LADDER: Tuple[int, ...] = (587, 300, 150, 75, 37, 18, 9, 5)
IMAGE_SUFFIXES = (".png",)

# Luma weights scaled by 10 000 so grayscale conversion is exact integer math.
_GRAY_WEIGHTS = np.array([2989, 5870, 1140], dtype=np.int64)


def _check_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"expected an (H, W, 3) image, got shape {image.shape}")
    if image.dtype != np.uint8:
        raise ValidationError(f"expected 8-bit channels, got {image.dtype}")
    return image


def _round_to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def rasterize_ellipse(ellipse: Ellipse, dims: Tuple[int, int]) -> np.ndarray:
    """Boolean (height, width) mask of pixels whose centers fall inside the ellipse"""
    height, width = dims
    if height <= 0 or width <= 0:
        raise ValidationError(f"image dimensions must be positive, got {dims}")
    dx = (np.arange(width) + 0.5 - ellipse.cx) / (ellipse.width / 2)
    dy = (np.arange(height) + 0.5 - ellipse.cy) / (ellipse.height / 2)
    return dy[:, None] ** 2 + dx[None, :] ** 2 <= 1.0


def region_masks(annotation: EllipseAnnotation, dims: Tuple[int, int]) -> Dict[str, np.ndarray]:
    """Pupil interior, iris ellipse interior and the iris annulus (iris minus pupil)"""
    pupil = rasterize_ellipse(annotation.pupil, dims)
    iris_ellipse = rasterize_ellipse(annotation.iris, dims)
    return {"pupil": pupil, "iris_ellipse": iris_ellipse, "iris": iris_ellipse & ~pupil}


def to_grayscale(image: np.ndarray) -> np.ndarray:
    image = _check_image(image)
    weighted = image.astype(np.int64) @ _GRAY_WEIGHTS
    gray = ((weighted + 5000) // 10000).astype(np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)


def apply_ablation(
    image: np.ndarray, annotation: Optional[EllipseAnnotation], mode: AblationMode
) -> np.ndarray:
    image = _check_image(image)
    if mode is AblationMode.NONE:
        return image.copy()
    if mode is AblationMode.GRAY:
        return to_grayscale(image)
    if annotation is None:
        raise ValidationError(f"ablation mode {mode.value} requires a pupil/iris annotation")

    # Pixels set to black for each mode
    masks = region_masks(annotation, image.shape[:2])
    if mode is AblationMode.NO_PUPIL:
        blacked = masks["pupil"]
    elif mode is AblationMode.NO_IRIS:
        blacked = masks["iris_ellipse"]
    elif mode is AblationMode.ONLY_PUPIL:
        blacked = ~masks["pupil"]
    else:
        blacked = ~masks["iris"]

    result = image.copy()
    result[blacked] = 0
    return result


def _area_matrix(source: int, target: int) -> np.ndarray:
    """(target, source) matrix averaging each output cell's footprint"""
    scale = source / target
    starts = np.arange(target)[:, None] * scale
    ends = starts + scale
    left = np.arange(source)[None, :]
    overlap = np.clip(np.minimum(ends, left + 1) - np.maximum(starts, left), 0.0, None)
    return overlap / scale


def _bilinear_matrix(source: int, target: int) -> np.ndarray:
    """(target, source) interpolation matrix with half-pixel centers"""
    positions = (np.arange(target) + 0.5) * source / target - 0.5
    positions = np.clip(positions, 0, source - 1)
    # Clamp at the borders
    lower = np.floor(positions).astype(int)
    upper = np.minimum(lower + 1, source - 1)
    frac = positions - lower
    matrix = np.zeros((target, source))
    rows = np.arange(target)
    np.add.at(matrix, (rows, lower), 1.0 - frac)
    np.add.at(matrix, (rows, upper), frac)
    return matrix


def _resample(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Separable resample: one matrix product along each axis"""
    vertical = np.tensordot(rows, image.astype(np.float64), axes=([1], [0]))  # (T1, W, C)
    both = np.tensordot(cols, vertical, axes=([1], [1]))  # (T2, T1, C)
    return both.transpose(1, 0, 2)


def area_downsample(image: np.ndarray, size: int) -> np.ndarray:
    """Area-average resample to size x size"""
    image = _check_image(image)
    height, width = image.shape[:2]
    if not 1 <= size <= min(height, width):
        raise ValidationError(f"target size must lie in [1, {min(height, width)}], got {size}")
    return _round_to_uint8(
        _resample(image, _area_matrix(height, size), _area_matrix(width, size))
    )


def bilinear_upsample(image: np.ndarray, size: int = MODEL_RESOLUTION) -> np.ndarray:
    image = _check_image(image)
    height, width = image.shape[:2]
    if size < max(height, width):
        raise ValidationError(f"cannot upsample a {height}x{width} image to {size}")
    return _round_to_uint8(
        _resample(image, _bilinear_matrix(height, size), _bilinear_matrix(width, size))
    )


def resolution_ladder(
    image: np.ndarray, target_size: int, output_size: int = MODEL_RESOLUTION
) -> np.ndarray:
    """Downsample to target_size and upsample back to the model resolution"""
    if target_size is None or target_size < 1:
        raise ValidationError(f"target size must be at least 1, got {target_size}")
    return bilinear_upsample(area_downsample(image, target_size), output_size)


def normalized_pupil_size(annotation: EllipseAnnotation) -> float:
    """Mean pupil diameter over mean iris diameter"""
    iris = annotation.iris.mean_diameter
    if iris <= 0:
        raise ValidationError("iris size must be positive")
    return annotation.pupil.mean_diameter / iris


def load_image(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataNotFoundError(f"image not found: {path}")
    # Palette and alpha images are flattened to RGB
    with Image.open(path) as handle:
        return np.asarray(handle.convert("RGB"), dtype=np.uint8).copy()


def save_image(image: np.ndarray, path: Union[str, Path]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(_check_image(image)).save(path, format="PNG")
    return str(path)


def _iter_images(input_dir: Path) -> List[Path]:
    if not input_dir.is_dir():
        raise DataNotFoundError(f"image directory not found: {input_dir}")
    return sorted(p for p in input_dir.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES)


def ablate_directory(
    input_dir: Union[str, Path],
    output_dir: Union[str, Path],
    mode: AblationMode,
    annotations: Mapping[str, EllipseAnnotation],
) -> List[str]:
    """Ablate every PNG under input_dir, mirroring the tree into output_dir"""
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    written = []
    for path in _iter_images(input_dir):
        annotation = annotations.get(path.stem)
        if mode.needs_annotation and annotation is None:
            raise ValidationError(f"image {path.stem} has no pupil/iris annotation")
        result = apply_ablation(load_image(path), annotation, mode)
        written.append(save_image(result, output_dir / path.relative_to(input_dir)))
    logger.info(f"Ablated {len(written)} images with mode {mode.value}")
    return written


def downres_directory(
    input_dir: Union[str, Path],
    output_dir: Union[str, Path],
    sizes: Sequence[int] = DEFAULT_LADDER,
) -> List[str]:
    """Resolution ladder for every PNG; one output subtree per size"""
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    written = []
    images = _iter_images(input_dir)
    for size in sizes:
        for path in images:
            result = resolution_ladder(load_image(path), size)
            target = output_dir / str(size) / path.relative_to(input_dir)
            written.append(save_image(result, target))
    logger.info(f"Resampled {len(images)} images at {len(sizes)} resolutions")
    return written


def parse_ladder(sizes: Union[str, Iterable[int], None]) -> Tuple[int, ...]:
    if sizes is None or sizes == "":
        return DEFAULT_LADDER
    if isinstance(sizes, str):
        try:
            sizes = [int(part) for part in sizes.split(",") if part.strip()]
        except ValueError:
            raise ValidationError(f"invalid resolution list {sizes!r}")
    sizes = tuple(sizes)
    if any(size < 1 for size in sizes):
        raise ValidationError("resolutions must be positive")
    return sizes
