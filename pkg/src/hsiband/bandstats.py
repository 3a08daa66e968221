"""Inter-band correlation and contrast-SNR statistics."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from hsiband.cube_io import PatchSet, SpectralCube, extract_patch_samples
from hsiband.errors import ValidationError

__all__ = [
    "CorrelationMatrix",
    "ContrastSampleSet",
    "CsnrTable",
    "CsnrProfile",
    "correlation_matrix",
    "michelson_contrast",
    "csnr",
    "csnr_table",
    "csnr_high_probability",
    "CSNR_CAP",
]

logger = logging.getLogger(__name__)

CSNR_CAP = 1e6
_EPS = 1e-12


def _write_matrix(path, values: np.ndarray, row_name: str, row_ids, col_ids) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([row_name, *col_ids])
        for rid, row in zip(row_ids, values):
            w.writerow([rid, *(repr(float(v)) for v in row)])


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray
    zero_variance: np.ndarray  # bool mask of flagged bands

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError("correlation matrix must be square")
        assert np.max(np.abs(v - v.T), initial=0.0) <= 1e-12
        assert np.all(np.abs(np.diag(v) - 1.0) <= 1e-12)
        assert np.all((v >= -1.0) & (v <= 1.0))

    @property
    def n_bands(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, idx):
        return self.values[idx]

    def to_csv(self, path) -> None:
        ids = list(range(self.n_bands))
        _write_matrix(path, self.values, "channel", ids, ids)


def correlation_matrix(samples: np.ndarray) -> CorrelationMatrix:
    """Pearson correlation between the columns of an (n_pixels, n_bands) matrix.

    Zero-variance bands get 0 off the diagonal and 1 on it, and are flagged.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("samples must be a 2-D (n_pixels, n_bands) matrix")
    n = x.shape[0]
    if n < 2:
        raise ValidationError("correlation needs at least 2 pixels")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    var = np.diag(cov).copy()
    dead = var <= _EPS * max(1.0, float(np.max(np.abs(x), initial=0.0)) ** 2)
    if np.any(dead):
        logger.warning("zero-variance bands: %s", np.flatnonzero(dead).tolist())
    inv_sd = np.where(dead, 0.0, 1.0 / np.sqrt(np.where(dead, 1.0, var)))
    corr = cov * inv_sd[:, None] * inv_sd[None, :]
    corr = np.clip(0.5 * (corr + corr.T), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(corr, dead)


def michelson_contrast(mean_fg: float, mean_bg: float) -> float:
    """Signed Michelson contrast ``(fg - bg) / (fg + bg)``; 0 for a vanishing denominator."""
    denom = mean_fg + mean_bg
    if abs(denom) < _EPS:
        return 0.0
    return (mean_fg - mean_bg) / denom


@dataclass(frozen=True)
class ContrastSampleSet:
    pair_id: tuple[str, str]
    contrasts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.contrasts, dtype=np.float64).reshape(-1)
        if c.size == 0:
            raise ValidationError("contrast sample set is empty")
        if np.any(np.abs(c) > 1.0 + 1e-12):
            raise ValidationError("contrast values must lie in [-1, 1]")
        object.__setattr__(self, "contrasts", c)


def csnr(contrasts) -> float:
    """|mean contrast| over its sample standard deviation.

    Zero spread returns :data:`CSNR_CAP` unless the mean is also zero, in
    which case the result is 0.  Values are capped at :data:`CSNR_CAP`.
    """
    c = contrasts.contrasts if isinstance(contrasts, ContrastSampleSet) else np.asarray(contrasts, float)
    if c.size < 2:
        raise ValidationError("CSNR needs at least 2 contrast samples")
    mean = abs(float(np.mean(c)))
    sd = float(np.std(c, ddof=1))
    if sd < _EPS:
        return 0.0 if mean < _EPS else CSNR_CAP
    return min(mean / sd, CSNR_CAP)


def _contrast_vec(fg: np.ndarray, bg: np.ndarray) -> np.ndarray:
    denom = fg + bg
    safe = np.abs(denom) >= _EPS
    return np.where(safe, (fg - bg) / np.where(safe, denom, 1.0), 0.0)


@dataclass(frozen=True)
class CsnrTable:
    values: np.ndarray  # (n_bands, n_pairs)
    pairs: tuple[tuple[str, str], ...]
    draws: int = 0
    seed: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValidationError("CSNR table entries must be finite and non-negative")

    @property
    def n_bands(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path) -> None:
        _write_matrix(path, self.values, "channel", range(self.n_bands), [f"{a}|{b}" for a, b in self.pairs])


def contrast_samples(
    fg: np.ndarray, bg: np.ndarray, draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Per-draw Michelson contrasts of half-patch sub-sample means, (draws, n_bands)."""
    nf, nb = max(fg.shape[0] // 2, 1), max(bg.shape[0] // 2, 1)
    out = np.empty((draws, fg.shape[1]))
    for d in range(draws):
        mf = fg[rng.choice(fg.shape[0], nf, replace=False)].mean(axis=0)
        mb = bg[rng.choice(bg.shape[0], nb, replace=False)].mean(axis=0)
        out[d] = _contrast_vec(mf, mb)
    return out


def material_pairs(patches: PatchSet, background: str | None = None) -> list[tuple[str, str]]:
    """Every patch outside the background's class paired with the background patch."""
    bg = patches.find_background(background)
    return [(p.label, bg.label) for p in patches if p.class_id != bg.class_id]


def csnr_table(
    cube: SpectralCube,
    patches: PatchSet,
    draws: int = 50,
    seed: int = 0,
    background: str | None = None,
    pairs: Sequence[tuple[str, str]] | None = None,
) -> CsnrTable:
    """CSNR of every band for every foreground/background material pair."""
    if draws < 2:
        raise ValidationError("draws must be >= 2")
    if pairs is None:
        pairs = material_pairs(patches, background)
    pairs = tuple((str(a), str(b)) for a, b in pairs)
    if not pairs:
        raise ValidationError("no foreground/background pairs derivable from the patch set")
    rng = np.random.default_rng(seed)
    table = np.empty((cube.n_bands, len(pairs)))
    cache: dict[str, np.ndarray] = {}

    def samples(label):
        if label not in cache:
            cache[label] = extract_patch_samples(cube, patches.get(label))
        return cache[label]

    for j, (fg, bg) in enumerate(pairs):
        cs = contrast_samples(samples(fg), samples(bg), draws, rng)
        table[:, j] = [csnr(cs[:, k]) for k in range(cube.n_bands)]
    return CsnrTable(table, pairs, draws, seed)


@dataclass(frozen=True)
class CsnrProfile:
    p_hi: np.ndarray
    threshold: float
    percentile: float

    def __post_init__(self):
        if np.any((self.p_hi < 0) | (self.p_hi > 1)):
            raise ValidationError("p_hi must lie in [0, 1]")

    @property
    def n_bands(self) -> int:
        return int(self.p_hi.size)

    def to_csv(self, path, wavelengths_nm=None) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["channel", "wavelength_nm", "p_hi"])
            for ch, p in enumerate(self.p_hi):
                wl = "" if wavelengths_nm is None else repr(float(wavelengths_nm[ch]))
                w.writerow([ch, wl, repr(float(p))])


def csnr_high_probability(table: CsnrTable | np.ndarray, percentile: float = 75.0) -> CsnrProfile:
    """Fraction of each band's pairs whose CSNR reaches the global percentile."""
    values = np.asarray(table.values if isinstance(table, CsnrTable) else table, dtype=np.float64)
    if values.ndim == 1:
        values = values[None, :]
    if values.size == 0:
        raise ValidationError("CSNR table is empty")
    if not 0.0 < percentile < 100.0:
        raise ValidationError("percentile must lie in (0, 100)")
    finite = values[np.isfinite(values)]
    tau = float(np.percentile(finite, percentile))
    p_hi = np.mean(values >= tau, axis=1)
    return CsnrProfile(p_hi, tau, float(percentile))
