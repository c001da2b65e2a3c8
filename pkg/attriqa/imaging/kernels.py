"""Distortion kernels on float64 H x W x C arrays in [0, 1].

Each kernel takes (data, parameter, rng) where the parameter is already
mapped from strength through the schedule table. Kernels never write into
their input and may return values outside [0, 1]; range clipping and the
finiteness check happen in the bank.
"""

import math

import numpy as np
from scipy import fft, ndimage
from skimage import color

# Standard JPEG luminance quantization table (quality 50)
JPEG_LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)
JPEG_BASE_FACTOR = 0.1
JPEG_BLOCK = 8


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_blur(data: np.ndarray, sigma: float, rng=None) -> np.ndarray:
    if sigma <= 0:
        return data.copy()
    k = gaussian_kernel_1d(sigma)
    out = ndimage.correlate1d(data, k, axis=0, mode="reflect")
    return ndimage.correlate1d(out, k, axis=1, mode="reflect")


def disk_kernel(radius: float) -> np.ndarray:
    r = int(math.ceil(radius))
    y, x = np.mgrid[-r : r + 1, -r : r + 1]
    k = (x**2 + y**2 <= radius**2).astype(np.float64)
    return k / k.sum()


def lens_blur(data: np.ndarray, radius: float, rng=None) -> np.ndarray:
    if radius < 1.0:
        # a disk below one pixel is the identity
        return data.copy()
    k = disk_kernel(radius)[:, :, None]
    return ndimage.convolve(data, k, mode="reflect")


def motion_blur(data: np.ndarray, length: float, rng=None) -> np.ndarray:
    n = int(length)
    if n <= 1:
        return data.copy()
    k = np.full(n, 1.0 / n)
    return ndimage.correlate1d(data, k, axis=1, mode="reflect")


def white_gaussian_noise(data: np.ndarray, std: float, rng) -> np.ndarray:
    return data + std * rng.standard_normal(data.shape)


def impulse_noise(data: np.ndarray, prob: float, rng) -> np.ndarray:
    h, w = data.shape[:2]
    replaced = rng.random((h, w)) < prob
    salt = rng.random((h, w)) < 0.5
    out = data.copy()
    out[replaced & salt] = 1.0
    out[replaced & ~salt] = 0.0
    return out


def color_saturation_scale(data: np.ndarray, factor: float, rng=None) -> np.ndarray:
    if data.shape[2] == 1:
        return data.copy()
    hsv = color.rgb2hsv(data)
    hsv[..., 1] *= factor
    return color.hsv2rgb(hsv)


def brightness_shift(data: np.ndarray, shift: float, rng=None) -> np.ndarray:
    direction = 1.0 if data.mean() < 0.5 else -1.0
    return data + direction * shift


def contrast_scale(data: np.ndarray, factor: float, rng=None) -> np.ndarray:
    mean = data.mean()
    return mean + (data - mean) * factor


def jpeg_quantization(data: np.ndarray, scale: float, rng=None) -> np.ndarray:
    h, w, c = data.shape
    b = JPEG_BLOCK
    ph, pw = (-h) % b, (-w) % b
    padded = np.pad(data * 255.0 - 128.0, ((0, ph), (0, pw), (0, 0)), mode="symmetric")
    hh, ww = padded.shape[:2]
    # (rows, cols, c) -> (c, block_row, block_col, 8, 8)
    blocks = padded.reshape(hh // b, b, ww // b, b, c).transpose(4, 0, 2, 1, 3)
    coef = fft.dctn(blocks, type=2, axes=(-2, -1), norm="ortho")
    table = JPEG_BASE_FACTOR * JPEG_LUMA_TABLE * scale
    coef = np.round(coef / table) * table
    rec = fft.idctn(coef, type=2, axes=(-2, -1), norm="ortho")
    rec = rec.transpose(1, 3, 2, 4, 0).reshape(hh, ww, c)
    return (rec[:h, :w] + 128.0) / 255.0


def pixelate(data: np.ndarray, block: float, rng=None) -> np.ndarray:
    n = int(block)
    if n <= 1:
        return data.copy()
    h, w = data.shape[:2]
    rows = np.arange(0, h, n)
    cols = np.arange(0, w, n)
    sums = np.add.reduceat(np.add.reduceat(data, rows, axis=0), cols, axis=1)
    row_sizes = np.diff(np.append(rows, h))
    col_sizes = np.diff(np.append(cols, w))
    means = sums / (row_sizes[:, None, None] * col_sizes[None, :, None])
    return np.repeat(np.repeat(means, row_sizes, axis=0), col_sizes, axis=1)


KERNELS = {
    "gaussian_blur": gaussian_blur,
    "lens_blur": lens_blur,
    "motion_blur": motion_blur,
    "white_gaussian_noise": white_gaussian_noise,
    "impulse_noise": impulse_noise,
    "color_saturation_scale": color_saturation_scale,
    "brightness_shift": brightness_shift,
    "contrast_scale": contrast_scale,
    "jpeg_quantization": jpeg_quantization,
    "pixelate": pixelate,
}
