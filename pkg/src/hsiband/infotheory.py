"""Discrete mutual-information estimates and JMIM band ranking.

All estimates are plug-in (maximum-likelihood) values over quantile bins and
are reported in nats.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from hsiband.errors import SelectionError, ValidationError

__all__ = [
    "DiscretizedBand",
    "ClassVector",
    "BandScoreTable",
    "quantize_band",
    "mutual_information",
    "joint_pair_mi",
    "jmim_rank",
    "jmim_with_scores",
    "score_bands",
    "TIE_TOL",
]

logger = logging.getLogger(__name__)

# Scores closer than this are ties; the lower channel index wins.
TIE_TOL = 1e-10
DEFAULT_JOINT_CAP = 1 << 16


@dataclass(frozen=True)
class DiscretizedBand:
    bins: np.ndarray
    bin_count: int

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.int64).reshape(-1)
        if self.bin_count < 2:
            raise ValidationError("bin_count must be >= 2")
        if bins.size and (bins.min() < 0 or bins.max() >= self.bin_count):
            raise ValidationError(f"bin index outside [0, {self.bin_count})")
        object.__setattr__(self, "bins", bins)

    def __len__(self) -> int:
        return int(self.bins.size)


@dataclass(frozen=True)
class ClassVector:
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValidationError(f"class label outside [0, {self.n_classes})")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels) -> "ClassVector":
        """Build from arbitrary integer labels, remapped densely in sorted order."""
        uniq, inv = np.unique(np.asarray(labels), return_inverse=True)
        return cls(inv.reshape(-1), max(len(uniq), 1))

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def n_present(self) -> int:
        return int(np.unique(self.labels).size)


def quantize_band(values, bin_count: int = 32) -> DiscretizedBand:
    """Equal-frequency binning.

    A value's bin is ``floor(B * r / n)`` where ``r`` counts the samples
    strictly smaller than it, so tied values always share a bin and distinct
    values fill the bins evenly.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValidationError("cannot quantize an empty band")
    if not np.all(np.isfinite(v)):
        raise ValidationError("band contains non-finite values")
    n = v.size
    rank_below = np.searchsorted(np.sort(v, kind="stable"), v, side="left")
    bins = (rank_below * bin_count) // n
    return DiscretizedBand(bins.astype(np.int64), int(bin_count))


def _dense(codes: np.ndarray) -> tuple[np.ndarray, int]:
    uniq, inv = np.unique(codes, return_inverse=True)
    return inv.reshape(-1), int(uniq.size)


def _plugin_mi(x_codes: np.ndarray, c_codes: np.ndarray) -> float:
    """I(X;C) from two aligned integer code arrays, before clamping."""
    x, nx = _dense(x_codes)
    c, nc = _dense(c_codes)
    n = x.size
    joint = np.bincount(x * nc + c, minlength=nx * nc).reshape(nx, nc).astype(np.float64)
    px = joint.sum(axis=1)
    pc = joint.sum(axis=0)
    nz = joint > 0
    ratio = joint[nz] * n / np.outer(px, pc)[nz]
    return float(np.sum(joint[nz] * np.log(ratio)) / n)


def _check_aligned(*arrays: np.ndarray) -> None:
    sizes = {a.size for a in arrays}
    if len(sizes) != 1:
        raise ValidationError(f"length mismatch between aligned inputs: {sorted(sizes)}")
    if 0 in sizes:
        raise ValidationError("inputs are empty")


def mutual_information(x: DiscretizedBand, c: ClassVector) -> float:
    """Plug-in I(X;C) in nats, clamped at 0."""
    _check_aligned(x.bins, c.labels)
    return max(_plugin_mi(x.bins, c.labels), 0.0)


def joint_pair_mi(
    x: DiscretizedBand, y: DiscretizedBand, c: ClassVector, max_states: int = DEFAULT_JOINT_CAP
) -> float:
    """Plug-in I((X,Y);C), treating the band pair as one variable."""
    _check_aligned(x.bins, y.bins, c.labels)
    if x.bin_count * y.bin_count > max_states:
        raise ValidationError(
            f"joint alphabet {x.bin_count}x{y.bin_count} exceeds the cap of {max_states} states"
        )
    pair = x.bins * y.bin_count + y.bins
    return max(_plugin_mi(pair, c.labels), 0.0)


def _argmax_lowest(scores: np.ndarray, allowed: np.ndarray) -> int:
    masked = np.where(allowed, scores, -np.inf)
    best = masked.max()
    return int(np.flatnonzero(allowed & (masked >= best - TIE_TOL))[0])


def jmim_with_scores(
    bands: Sequence[DiscretizedBand], c: ClassVector, k: int, max_states: int = DEFAULT_JOINT_CAP
) -> tuple[list[int], list[float]]:
    """JMIM forward selection; returns the picked channels and their scores.

    The first pick maximizes I(f; C).  Every later pick maximizes, over the
    remaining bands, the minimum of I(f, s; C) across the already selected
    bands ``s``.
    """
    n = len(bands)
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} out of range for {n} bands")
    if c.n_present < 2:
        raise SelectionError("JMIM needs at least two classes present")

    relevance = np.array([mutual_information(b, c) for b in bands])
    remaining = np.ones(n, dtype=bool)
    # running min of the joint term against the selected set
    min_joint = np.full(n, np.inf)

    first = _argmax_lowest(relevance, remaining)
    order, scores = [first], [float(relevance[first])]
    remaining[first] = False
    logger.debug("JMIM pick 1: channel %d, I(f;C)=%.6f", first, relevance[first])

    while len(order) < k:
        last = bands[order[-1]]
        for i in np.flatnonzero(remaining):
            j = joint_pair_mi(bands[i], last, c, max_states)
            if j < min_joint[i]:
                min_joint[i] = j
        pick = _argmax_lowest(min_joint, remaining)
        order.append(pick)
        scores.append(float(min_joint[pick]))
        remaining[pick] = False
        logger.debug("JMIM pick %d: channel %d, min joint MI=%.6f", len(order), pick, min_joint[pick])
    return order, scores


def jmim_rank(
    bands: Sequence[DiscretizedBand], c: ClassVector, k: int, max_states: int = DEFAULT_JOINT_CAP
) -> list[int]:
    return jmim_with_scores(bands, c, k, max_states)[0]


@dataclass(frozen=True)
class BandScoreTable:
    """Per-channel relevance and JMIM rank (``-1`` when not ranked)."""

    relevance_mi: np.ndarray
    jmim_rank: np.ndarray
    jmim_score: np.ndarray
    wavelengths_nm: np.ndarray | None = None

    @property
    def n_bands(self) -> int:
        return int(self.relevance_mi.size)

    @property
    def ranked(self) -> list[int]:
        """Channels in JMIM order."""
        idx = np.flatnonzero(self.jmim_rank >= 0)
        return [int(i) for i in idx[np.argsort(self.jmim_rank[idx], kind="stable")]]

    def rank_of(self, channel: int) -> int | None:
        r = int(self.jmim_rank[channel])
        return None if r < 0 else r

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["channel", "wavelength_nm", "relevance_mi", "jmim_rank"])
            for ch in range(self.n_bands):
                wl = "" if self.wavelengths_nm is None else repr(float(self.wavelengths_nm[ch]))
                rank = self.rank_of(ch)
                w.writerow([ch, wl, repr(float(self.relevance_mi[ch])), "" if rank is None else rank])


def score_bands(
    samples: np.ndarray,
    labels,
    k: int,
    bin_count: int = 32,
    wavelengths_nm: np.ndarray | None = None,
    max_states: int = DEFAULT_JOINT_CAP,
) -> BandScoreTable:
    """Quantize every column of ``samples`` and run JMIM over them."""
    samples = np.asarray(samples, dtype=np.float64)
    classes = ClassVector.from_labels(labels)
    bands = [quantize_band(samples[:, j], bin_count) for j in range(samples.shape[1])]
    order, scores = jmim_with_scores(bands, classes, k, max_states)
    relevance = np.array([mutual_information(b, classes) for b in bands])
    rank = np.full(len(bands), -1, dtype=np.int64)
    jscore = np.full(len(bands), np.nan)
    for r, (ch, s) in enumerate(zip(order, scores)):
        rank[ch] = r
        jscore[ch] = s
    return BandScoreTable(relevance, rank, jscore, wavelengths_nm)
