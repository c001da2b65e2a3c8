import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from attriqa.errors import DataError

logger = logging.getLogger(__name__)

MIN_SIDE = 16


@dataclass(frozen=True, eq=False)
class Image:
    """H x W x C raster with channel values in [0, 1].

    The array is copied on construction and marked read-only, so kernels can
    never modify their input in place.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise DataError(f"image must be HxWx1 or HxWx3, got shape {data.shape}")
        if data.shape[0] < MIN_SIDE or data.shape[1] < MIN_SIDE:
            raise DataError(
                f"image {data.shape[0]}x{data.shape[1]} is smaller than "
                f"{MIN_SIDE}x{MIN_SIDE}"
            )
        if not np.all(np.isfinite(data)):
            raise DataError("image contains non-finite values")
        if data.min() < 0.0 or data.max() > 1.0:
            raise DataError(
                f"image values must lie in [0, 1], got [{data.min()}, {data.max()}]"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def to_rgb(self) -> "Image":
        if self.channels == 3:
            return self
        return Image(np.repeat(self.data, 3, axis=2))


def to_uint8(img: Image) -> np.ndarray:
    return np.round(img.data * 255.0).astype(np.uint8)


def load_png(path: Path | str) -> Image:
    path = Path(path)
    try:
        with PILImage.open(path) as pil:
            if pil.mode == "L":
                arr = np.asarray(pil, dtype=np.uint8)
            else:
                arr = np.asarray(pil.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as e:
        raise DataError(f"cannot read image {path}: {e}") from e
    return Image(arr.astype(np.float64) / 255.0)


def save_png(img: Image, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = to_uint8(img)
    if img.channels == 1:
        pil = PILImage.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(arr, mode="RGB")
    pil.save(path, format="PNG")
    logger.debug(f"Wrote {path}")
    return path
