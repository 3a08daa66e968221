"""Patch-pair separability metrics and report aggregation.

Dissimilarity: Euclidean distance and spectral angle between patch means, and
the two-sample Hotelling T^2 statistic.  Perception: CIE76 colour difference
between patch-mean colours in CIELAB.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from hsiband.cube_io import LabeledPatch, PatchSet
from hsiband.errors import ValidationError

__all__ = [
    "PatchStats",
    "LabColor",
    "PairMetricRecord",
    "MetricReport",
    "METRICS",
    "patch_stats",
    "euclidean_d2",
    "sam_angle",
    "hotelling_t2",
    "srgb_to_lab",
    "delta_e",
    "image_patch_samples",
    "evaluate_pairs",
    "aggregate_report",
    "read_records_csv",
]

METRICS = ("d2", "sam", "t2", "de")

# sRGB (IEC 61966-2-1) primaries to CIE XYZ, D65
SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
D65_WHITE = np.array([0.95047, 1.00000, 1.08883])


@dataclass(frozen=True)
class PatchStats:
    mean: np.ndarray
    covariance: np.ndarray
    n: int


def patch_stats(samples) -> PatchStats:
    """Mean and (n-1)-divisor covariance of an (n, d) sample matrix."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValidationError("patch statistics need at least 2 samples")
    mu = x.mean(axis=0)
    d = x - mu
    cov = d.T @ d / (x.shape[0] - 1)
    return PatchStats(mu, 0.5 * (cov + cov.T), int(x.shape[0]))


def euclidean_d2(mu_a, mu_b) -> float:
    d = np.asarray(mu_a, dtype=np.float64) - np.asarray(mu_b, dtype=np.float64)
    return float(np.sqrt(d @ d))


def sam_angle(mu_a, mu_b) -> float:
    """Angle in radians between two vectors; scale-invariant."""
    a = np.asarray(mu_a, dtype=np.float64)
    b = np.asarray(mu_b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValidationError("spectral angle undefined for a zero-magnitude vector")
    cos = float(np.clip((a / na) @ (b / nb), -1.0, 1.0))
    return math.acos(cos)


def hotelling_t2(a: PatchStats, b: PatchStats) -> tuple[float, float]:
    """Two-sample Hotelling T^2 and its F-transform p-value.

    The pooled covariance gets ``1e-9 * trace / d`` added to its diagonal
    (with a tiny absolute floor) so constant patches stay invertible.
    """
    d = a.mean.size
    n = a.n + b.n
    if n - 2 < d or n - d - 1 < 1:
        raise ValidationError(f"too few samples ({a.n}+{b.n}) for a {d}-D T^2 test")
    diff = a.mean - b.mean
    if not np.any(diff):
        return 0.0, 1.0
    pooled = ((a.n - 1) * a.covariance + (b.n - 1) * b.covariance) / (n - 2)
    ridge = max(1e-9 * np.trace(pooled) / d, 1e-12)
    s = pooled + ridge * np.eye(d)
    t2 = float(a.n * b.n / n * diff @ np.linalg.solve(s, diff))
    if not math.isfinite(t2):
        raise ValidationError("T^2 evaluated to a non-finite value")
    f = t2 * (n - d - 1) / (d * (n - 2))
    p = float(stats.f.sf(f, d, n - d - 1))
    return t2, p


@dataclass(frozen=True)
class LabColor:
    L: float
    a: float
    b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.L, self.a, self.b])


def _srgb_decode(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)


def srgb_to_lab(rgb) -> LabColor:
    """8-bit (or fractional 0-255) sRGB triple to CIELAB under D65."""
    c = np.asarray(rgb, dtype=np.float64).reshape(3) / 255.0
    if np.any(c < 0) or np.any(c > 1):
        raise ValidationError(f"sRGB components must lie in [0, 255], got {rgb}")
    xyz = SRGB_TO_XYZ @ _srgb_decode(c)
    fx, fy, fz = _lab_f(xyz / D65_WHITE)
    return LabColor(float(116 * fy - 16), float(500 * (fx - fy)), float(200 * (fy - fz)))


def delta_e(a: LabColor, b: LabColor) -> float:
    """CIE76 colour difference."""
    return float(np.linalg.norm(a.as_array() - b.as_array()))


@dataclass
class PairMetricRecord:
    pair: str
    d2: float
    sam: float
    t2: float
    de: float
    p_value: float | None = None
    modality: str = "rgb"

    def to_dict(self) -> dict:
        return {
            "pair": self.pair,
            "modality": self.modality,
            "d2": self.d2,
            "sam": self.sam,
            "t2": self.t2,
            "p_value": self.p_value,
            "de": self.de,
        }


def image_patch_samples(image: np.ndarray, patch: LabeledPatch) -> np.ndarray:
    """Channel values inside ``patch`` as an (n_pixels, channels) float matrix."""
    img = np.asarray(image)
    if img.ndim != 3:
        raise ValidationError("expected a (rows, cols, channels) image")
    if not patch.fits(img.shape[0], img.shape[1]):
        raise ValidationError(f"patch {patch.label!r} rect {patch.rect} outside image {img.shape[:2]}")
    x, y, w, h = patch.rect
    return img[y : y + h, x : x + w].reshape(w * h, img.shape[2]).astype(np.float64)


def evaluate_pairs(
    image: np.ndarray, patches: PatchSet, background_label: str | None = None, modality: str = "rgb"
) -> list[PairMetricRecord]:
    """All metrics for every foreground patch against the background patch."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError("evaluation needs a 3-channel image")
    bg = patches.find_background(background_label)
    bg_samples = image_patch_samples(img, bg)
    bg_stats = patch_stats(bg_samples)
    bg_lab = srgb_to_lab(np.clip(bg_stats.mean, 0, 255))
    records = []
    for p in patches:
        if p.label == bg.label:
            continue
        st = patch_stats(image_patch_samples(img, p))
        t2, pv = hotelling_t2(st, bg_stats)
        if not np.any(st.mean) or not np.any(bg_stats.mean):
            sam = float("nan")
        else:
            sam = sam_angle(st.mean, bg_stats.mean)
        records.append(
            PairMetricRecord(
                pair=p.label,
                d2=euclidean_d2(st.mean, bg_stats.mean),
                sam=sam,
                t2=t2,
                de=delta_e(srgb_to_lab(np.clip(st.mean, 0, 255)), bg_lab),
                p_value=pv,
                modality=modality,
            )
        )
    return records


@dataclass
class MetricReport:
    rgb: list[PairMetricRecord]
    composite: list[PairMetricRecord]
    averages: dict[str, dict[str, float]] = field(default_factory=dict)
    improvement_pct: dict[str, float] = field(default_factory=dict)
    winners: list[dict[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pairs": [
                {"pair": r.pair, "rgb": r.to_dict(), "composite": c.to_dict(), "winner": w}
                for r, c, w in zip(self.rgb, self.composite, self.winners)
            ],
            "averages": self.averages,
            "improvement_pct": self.improvement_pct,
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    def to_csv(self, path: str | Path) -> None:
        header = ["pair"] + [f"{m}_{mod}" for m in METRICS for mod in ("rgb", "hsi")]
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r, c in zip(self.rgb, self.composite):
                w.writerow([r.pair] + [repr(float(getattr(x, m))) for m in METRICS for x in (r, c)])
            w.writerow(["Average"] + [repr(self.averages[mod][m]) for m in METRICS for mod in ("rgb", "composite")])
            row = ["Improvement (%)"]
            for m in METRICS:
                row += [repr(self.improvement_pct[m]), ""]
            w.writerow(row)


def _improvement(rgb: float, comp: float) -> float:
    if rgb == 0:
        return 0.0 if comp == 0 else math.copysign(math.inf, comp)
    return 100.0 * (comp - rgb) / rgb


def aggregate_report(records_rgb: Sequence[PairMetricRecord], records_composite: Sequence[PairMetricRecord]) -> MetricReport:
    """Per-metric means per modality, improvement from unrounded means, per-pair winners."""
    ids_r = [r.pair for r in records_rgb]
    ids_c = [r.pair for r in records_composite]
    if ids_r != ids_c:
        raise ValidationError(f"pair-id mismatch between modalities: {ids_r} vs {ids_c}")
    if not ids_r:
        raise ValidationError("no records to aggregate")
    averages = {"rgb": {}, "composite": {}}
    improvement = {}
    for m in METRICS:
        ar = float(np.mean([getattr(r, m) for r in records_rgb]))
        ac = float(np.mean([getattr(r, m) for r in records_composite]))
        averages["rgb"][m] = ar
        averages["composite"][m] = ac
        improvement[m] = _improvement(ar, ac)
    winners = []
    for r, c in zip(records_rgb, records_composite):
        w = {}
        for m in METRICS:
            vr, vc = getattr(r, m), getattr(c, m)
            w[m] = "composite" if vc > vr else ("rgb" if vr > vc else "tie")
        winners.append(w)
    return MetricReport(list(records_rgb), list(records_composite), averages, improvement, winners)


def read_records_csv(path: str | Path) -> tuple[list[PairMetricRecord], list[PairMetricRecord]]:
    """Read per-pair rows laid out as ``pair,d2_rgb,d2_hsi,...,de_hsi``.

    Trailing ``Average`` / ``Improvement`` rows, if present, are ignored.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"records file not found: {path}")
    expected = ["pair"] + [f"{m}_{mod}" for m in METRICS for mod in ("rgb", "hsi")]
    rgb, comp = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != expected:
            raise ValidationError(f"records file {path}: expected header {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or not row[0].strip():
                continue
            name = row[0].strip()
            if name.lower().startswith(("average", "improvement")):
                continue
            if len(row) != len(expected):
                raise ValidationError(f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}")
            try:
                vals = dict(zip(expected[1:], (float(v) for v in row[1:])))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: non-numeric value") from exc
            rgb.append(PairMetricRecord(name, *(vals[f"{m}_rgb"] for m in METRICS), modality="rgb"))
            comp.append(PairMetricRecord(name, *(vals[f"{m}_hsi"] for m in METRICS), modality="composite"))
    if not rgb:
        raise ValidationError(f"records file {path} has no data rows")
    return rgb, comp
