"""The distortion table: one kernel and one parameter schedule per id.

Strength s in [0, 1] is realized at discrete levels, s = level / levels.
Every schedule is a linear map of s, listed here and nowhere else.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from attriqa.errors import ConfigError, UnknownDistortion

DEFAULT_LEVELS = 5


class Category(str, Enum):
    BLUR = "blur"
    NOISE = "noise"
    COLOR = "color"
    COMPRESSION = "compression"
    BRIGHTNESS_CONTRAST = "brightness-contrast"
    SPATIAL = "spatial"


@dataclass(frozen=True)
class DistortionType:
    id: str
    category: Category
    parameter: str
    formula: str
    schedule: Callable[[float], float]
    stochastic: bool = False
    description: str = ""

    def parameter_at(self, strength: float) -> float:
        return self.schedule(strength)


@dataclass(frozen=True)
class StrengthLevel:
    level: int
    levels: int = DEFAULT_LEVELS

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigError(f"level count must be >= 1, got {self.levels}")
        if not 0 <= self.level <= self.levels:
            raise ConfigError(f"level {self.level} outside 0..{self.levels}")

    @property
    def strength(self) -> float:
        return self.level / self.levels

    @property
    def applied(self) -> bool:
        return self.level > 0


_TABLE: tuple[DistortionType, ...] = (
    DistortionType(
        "gaussian_blur", Category.BLUR, "sigma", "5·s",
        lambda s: 5.0 * s,
        description="separable Gaussian, radius ceil(3·sigma), reflect padding",
    ),
    DistortionType(
        "lens_blur", Category.BLUR, "disk radius", "8·s",
        lambda s: 8.0 * s,
        description="uniform disk kernel, reflect padding",
    ),
    DistortionType(
        "motion_blur", Category.BLUR, "line length", "1 + 2·floor(10·s)",
        lambda s: 1.0 + 2.0 * int(10.0 * s + 1e-9),
        description="horizontal line kernel centered on the pixel, reflect padding",
    ),
    DistortionType(
        "white_gaussian_noise", Category.NOISE, "noise std", "0.2·s",
        lambda s: 0.2 * s,
        stochastic=True,
        description="additive i.i.d. Gaussian noise per channel",
    ),
    DistortionType(
        "impulse_noise", Category.NOISE, "replacement probability", "0.4·s",
        lambda s: 0.4 * s,
        stochastic=True,
        description="salt-and-pepper: replaced pixels become black or white",
    ),
    DistortionType(
        "color_saturation_scale", Category.COLOR, "saturation factor", "1 − 0.8·s",
        lambda s: 1.0 - 0.8 * s,
        description="HSV S-channel multiply; no-op on single-channel images",
    ),
    DistortionType(
        "brightness_shift", Category.BRIGHTNESS_CONTRAST, "shift", "±0.5·s",
        lambda s: 0.5 * s,
        description="brightens images with mean < 0.5, darkens the others",
    ),
    DistortionType(
        "contrast_scale", Category.BRIGHTNESS_CONTRAST, "contrast factor", "1 − 0.8·s",
        lambda s: 1.0 - 0.8 * s,
        description="scales deviations from the image mean",
    ),
    DistortionType(
        "jpeg_quantization", Category.COMPRESSION, "quantization scale", "1 + 19·s",
        lambda s: 1.0 + 19.0 * s,
        description="8x8 block DCT, quantized by 0.1·(JPEG luminance table)·scale",
    ),
    DistortionType(
        "pixelate", Category.SPATIAL, "block size", "1 + floor(15·s)",
        lambda s: 1.0 + int(15.0 * s + 1e-9),
        description="block averages, partial blocks at the borders",
    ),
)

_BY_ID = {d.id: d for d in _TABLE}


def supported_distortions() -> list[DistortionType]:
    """All distortion types in table order."""
    return list(_TABLE)


def parse_distortion(name: str) -> DistortionType:
    key = name.strip().lower().replace("-", "_").replace(" ", "_")
    try:
        return _BY_ID[key]
    except KeyError:
        raise UnknownDistortion(f"unsupported distortion id {name!r}") from None


def parse_distortions(names) -> list[DistortionType]:
    return [parse_distortion(n) for n in names]


def schedule_rows(levels: int = DEFAULT_LEVELS) -> list[dict]:
    rows = []
    for d in _TABLE:
        rows.append(
            {
                "id": d.id,
                "category": d.category.value,
                "parameter": d.parameter,
                "formula": d.formula,
                "stochastic": d.stochastic,
                "description": d.description,
                "values": [
                    round(d.parameter_at(level / levels), 4)
                    for level in range(1, levels + 1)
                ],
            }
        )
    return rows
