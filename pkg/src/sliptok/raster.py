"""Small raster helpers shared by segmentation, glyph synthesis, and features."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError


def load_image(path: str | Path) -> np.ndarray:
    """Read PNG/JPEG from disk as an 8-bit grayscale array (luminance)."""
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def save_png(image: np.ndarray, path: str | Path) -> None:
    Image.fromarray(to_grayscale(image), mode="L").save(path, format="PNG")


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Coerce a 2-D gray or 3-D RGB(A) array to uint8 grayscale by luminance."""
    arr = np.asarray(image)
    if arr.ndim == 3:
        rgb = arr[..., :3].astype(np.float64)
        arr = rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
    elif arr.ndim != 2:
        raise DataError(f"expected a 2-D or 3-D image array, got shape {arr.shape}")
    if arr.size == 0:
        raise DataError("empty image")
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def otsu_threshold(gray: np.ndarray) -> float:
    """Otsu's between-class-variance threshold; pixels <= the result are ink."""
    hist = np.bincount(gray.reshape(-1), minlength=256).astype(np.float64)
    total = hist.sum()
    omega = np.cumsum(hist) / total
    mu = np.cumsum(hist * np.arange(256)) / total
    mu_total = mu[-1]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = np.where(denom > 0, (mu_total * omega - mu) ** 2 / denom, 0.0)
    return float(np.argmax(sigma_b[:-1])) + 0.5


def binarize_ink(gray: np.ndarray) -> np.ndarray:
    """Boolean ink mask (ink = darker side of the Otsu split)."""
    gray = to_grayscale(gray)
    if gray.min() == gray.max():
        # Constant image: call it all-ink when dark, all-background when light.
        return np.full(gray.shape, gray.min() < 128, dtype=bool)
    return gray <= otsu_threshold(gray)


def moving_average(profile: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return profile.astype(np.float64)
    kernel = np.ones(window, dtype=np.float64) / window
    return np.convolve(profile.astype(np.float64), kernel, mode="same")
