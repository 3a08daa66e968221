"""Pseudo-colour composites from a handful of selected bands.

Pipeline: band-window averaging -> gray-world white balance -> percentile
stretch + gamma -> 8-bit quantization (round half up).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from hsiband.cube_io import SpectralCube
from hsiband.errors import ValidationError

__all__ = [
    "ChannelMapping",
    "CompositeImage",
    "integrate_channel",
    "window_channels",
    "gray_world_white_balance",
    "gamma_encode",
    "quantize_8bit",
    "reconstruct_composite",
    "write_png",
    "read_png",
]

logger = logging.getLogger(__name__)

GAMMA = 2.2
PERCENTILES = (0.1, 99.9)


@dataclass(frozen=True)
class ChannelMapping:
    red_center: int
    green_center: int
    blue_center: int
    half_width: int = 7

    def __post_init__(self):
        centers = (self.red_center, self.green_center, self.blue_center)
        if len(set(centers)) != 3:
            raise ValidationError(f"mapping centers must be distinct, got {centers}")
        if self.half_width < 0:
            raise ValidationError("half_width must be >= 0")

    @classmethod
    def from_channels(cls, channels, half_width: int = 7) -> "ChannelMapping":
        """Longest wavelength to blue, middle to red, shortest to green.

        Putting the NIR band on blue gives NIR-bright materials an artificial
        blue tint while the two visible bands keep their natural order.
        """
        chans = sorted(int(c) for c in channels)
        if len(chans) != 3:
            raise ValidationError(f"mapping requires 3 channels, got {len(chans)}")
        lo, mid, hi = chans
        return cls(red_center=mid, green_center=lo, blue_center=hi, half_width=half_width)

    @property
    def centers(self) -> tuple[int, int, int]:
        return (self.red_center, self.green_center, self.blue_center)

    def to_dict(self) -> dict:
        return {"red": self.red_center, "green": self.green_center, "blue": self.blue_center}


def window_channels(n_bands: int, center: int, half_width: int) -> range:
    if not 0 <= center < n_bands:
        raise ValidationError(f"center channel {center} outside [0, {n_bands})")
    lo, hi = max(center - half_width, 0), min(center + half_width, n_bands - 1)
    if hi - lo != 2 * half_width:
        logger.info("window around channel %d clamped to %d..%d", center, lo, hi)
    return range(lo, hi + 1)


def integrate_channel(cube: SpectralCube, center: int, half_width: int) -> np.ndarray:
    """Mean reflectance over channels ``center +/- half_width`` (clamped to the cube)."""
    win = window_channels(cube.n_bands, center, half_width)
    return cube.data[win.start : win.stop].astype(np.float64).mean(axis=0)


def gray_world_white_balance(planes) -> tuple[np.ndarray, np.ndarray]:
    """Scale each plane so its mean matches the mean of the plane means.

    All-zero planes are left alone and excluded from the target mean.
    Returns ``(balanced, scales)``.
    """
    planes = np.asarray(planes, dtype=np.float64)
    if planes.ndim != 3 or planes.shape[0] != 3:
        raise ValidationError("expected three 2-D planes of equal shape")
    means = planes.reshape(3, -1).mean(axis=1)
    live = np.abs(means) > 1e-12
    if not np.any(live):
        logger.warning("all planes have zero mean; white balance skipped")
        return planes.copy(), np.ones(3)
    if not np.all(live):
        logger.warning("zero-mean plane(s) %s passed through unscaled", np.flatnonzero(~live).tolist())
    target = means[live].mean()
    scales = np.where(live, target / np.where(live, means, 1.0), 1.0)
    return planes * scales[:, None, None], scales


def gamma_encode(plane, gamma: float = GAMMA, percentiles=PERCENTILES) -> np.ndarray:
    """Percentile stretch to [0, 1] followed by ``v ** (1/gamma)``.

    A plane with no spread maps to all zeros.
    """
    plane = np.asarray(plane, dtype=np.float64)
    lo, hi = np.percentile(plane, percentiles)
    if hi - lo < 1e-12:
        logger.warning("degenerate percentile range; plane encoded as zeros")
        return np.zeros_like(plane)
    v = np.clip((plane - lo) / (hi - lo), 0.0, 1.0)
    return v ** (1.0 / gamma)


def quantize_8bit(v) -> np.ndarray:
    return np.clip(np.floor(np.asarray(v, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


@dataclass
class CompositeImage:
    pixels: np.ndarray  # (rows, cols, 3) uint8
    provenance: dict = field(default_factory=dict)

    def save(self, png_path: str | Path) -> Path:
        """Write the PNG plus a ``.json`` provenance sidecar; returns the sidecar path."""
        png_path = Path(png_path)
        write_png(self.pixels, png_path)
        side = png_path.with_suffix(".json")
        side.write_text(json.dumps(self.provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return side


def reconstruct_composite(cube: SpectralCube, mapping: ChannelMapping) -> CompositeImage:
    for c in mapping.centers:
        if not 0 <= c < cube.n_bands:
            raise ValidationError(f"mapping channel {c} outside cube with {cube.n_bands} bands")
    planes = np.stack([integrate_channel(cube, c, mapping.half_width) for c in mapping.centers])
    balanced, scales = gray_world_white_balance(planes)
    encoded = np.stack([gamma_encode(p) for p in balanced])
    pixels = np.moveaxis(quantize_8bit(encoded), 0, -1)
    prov = {
        "mapping": mapping.to_dict(),
        "half_width": mapping.half_width,
        "windows": {
            name: [w.start, w.stop - 1]
            for name, w in zip(("red", "green", "blue"), (window_channels(cube.n_bands, c, mapping.half_width) for c in mapping.centers))
        },
        "percentiles": list(PERCENTILES),
        "gamma": GAMMA,
        "wb_scales": [float(s) for s in scales],
    }
    return CompositeImage(np.ascontiguousarray(pixels), prov)


def write_png(pixels: np.ndarray, path: str | Path) -> None:
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise ValidationError("PNG output expects uint8 pixels")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(pixels)).save(path, format="PNG", optimize=False)


def read_png(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"image not found: {path}")
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
