"""Multi-criteria band selection.

The selector merges three per-band signals (JMIM relevance/rank, inter-band
correlation and the high-CSNR probability profile) into a small final set:

1. :func:`candidate_pool` gathers bands that stand out on any one criterion.
2. :func:`informed_select` walks the pool in JMIM order and greedily accepts
   bands that are weakly correlated with everything accepted so far and have
   at least median CSNR potential.  When the pool runs dry the rules are
   relaxed in a fixed, logged order.
3. :func:`diversity_refine` swaps out one member of any spectrally adjacent,
   highly correlated pair for a nearby pool band.

Every decision is appended to a log so a run can be audited afterwards.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hsiband.bandstats import (
    CorrelationMatrix,
    CsnrProfile,
    CsnrTable,
    correlation_matrix,
    csnr_high_probability,
    csnr_table,
)
from hsiband.cube_io import PatchSet, SpectralCube, pool_patch_samples
from hsiband.errors import SelectionError, ValidationError
from hsiband.infotheory import BandScoreTable, score_bands

__all__ = [
    "SelectionConfig",
    "Decision",
    "Candidate",
    "CandidatePool",
    "SelectionResult",
    "SelectionRun",
    "candidate_pool",
    "informed_select",
    "diversity_refine",
    "run_selection",
    "select_bands",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectionConfig:
    k_candidates: int = 5
    n_select: int = 3
    corr_threshold: float = 0.3
    csnr_percentile: float = 75.0
    adjacency_window: int = 7
    search_radius: int = 10
    bins: int = 32
    draws: int = 50
    seed: int = 0
    background: str | None = None
    max_corr_pixels: int = 250_000

    def __post_init__(self):
        if not 1 <= self.n_select <= self.k_candidates:
            raise ValidationError("need 1 <= n_select <= k_candidates")
        if not 0.0 < self.corr_threshold <= 1.0:
            raise ValidationError("corr_threshold must lie in (0, 1]")
        if self.adjacency_window < 1:
            raise ValidationError("adjacency_window must be >= 1")
        if self.search_radius < 0:
            raise ValidationError("search_radius must be >= 0")
        if not 0.0 < self.csnr_percentile < 100.0:
            raise ValidationError("csnr_percentile must lie in (0, 100)")

    def check_bands(self, n_bands: int) -> None:
        if self.k_candidates > n_bands:
            raise ValidationError(f"k_candidates={self.k_candidates} exceeds {n_bands} bands")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown selection config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Decision:
    channel: int | None
    action: str  # considered | accepted | rejected | replaced | relaxed | stable
    reason: str
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"channel": self.channel, "action": self.action, "reason": self.reason, "metrics": self.metrics}


@dataclass(frozen=True)
class Candidate:
    channel: int
    relevance_mi: float
    jmim_rank: int | None
    p_hi: float
    max_corr: float  # largest |corr| with other pool members
    sources: tuple[str, ...]

    def metrics(self) -> dict:
        return {
            "relevance_mi": _r(self.relevance_mi),
            "jmim_rank": self.jmim_rank,
            "p_hi": _r(self.p_hi),
            "max_pool_corr": _r(self.max_corr),
        }


def _r(v) -> float:
    return float(round(float(v), 12))


@dataclass(frozen=True)
class CandidatePool:
    candidates: tuple[Candidate, ...]
    corr: np.ndarray
    p_hi_median: float
    n_bands: int

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def channels(self) -> list[int]:
        return [c.channel for c in self.candidates]

    def get(self, channel: int) -> Candidate:
        for c in self.candidates:
            if c.channel == channel:
                return c
        raise KeyError(channel)

    def jmim_order(self) -> list[Candidate]:
        """Ranked bands first in rank order, then the rest by relevance."""
        def key(c: Candidate):
            return (0 if c.jmim_rank is not None else 1, c.jmim_rank or 0, -c.relevance_mi, c.channel)

        return sorted(self.candidates, key=key)

    def priority(self, channel: int) -> tuple:
        order = [c.channel for c in self.jmim_order()]
        return (order.index(channel),) if channel in order else (len(order), channel)


def candidate_pool(
    scores: BandScoreTable,
    corr: CorrelationMatrix,
    profile: CsnrProfile,
    cfg: SelectionConfig,
    log: list[Decision] | None = None,
) -> CandidatePool:
    """Union of the JMIM top list, stand-out CSNR bands and low-correlation bands."""
    n = scores.n_bands
    if corr.n_bands != n or profile.n_bands != n:
        raise ValidationError(
            f"axis mismatch: scores={n}, correlation={corr.n_bands}, csnr profile={profile.n_bands}"
        )
    cfg.check_bands(n)
    absc = np.abs(corr.values)
    sources: dict[int, list[str]] = {}

    if cfg.n_select == n:
        for ch in range(n):
            sources[ch] = ["all"]
    else:
        for ch in scores.ranked[: cfg.k_candidates]:
            sources.setdefault(ch, []).append("jmim")
        # strict '>' so a flat profile nominates nothing
        cut = float(np.percentile(profile.p_hi, cfg.csnr_percentile))
        for ch in np.flatnonzero(profile.p_hi > cut):
            sources.setdefault(int(ch), []).append("csnr")
        members = sorted(sources)
        for ch in range(n):
            if ch in sources:
                continue
            if np.max(absc[ch, members]) <= cfg.corr_threshold:
                sources.setdefault(ch, []).append("low_corr")

    channels = sorted(sources)
    cands = []
    for ch in channels:
        others = [o for o in channels if o != ch]
        mc = float(np.max(absc[ch, others])) if others else 0.0
        cands.append(
            Candidate(
                channel=ch,
                relevance_mi=float(scores.relevance_mi[ch]),
                jmim_rank=scores.rank_of(ch),
                p_hi=float(profile.p_hi[ch]),
                max_corr=mc,
                sources=tuple(sources[ch]),
            )
        )
    pool = CandidatePool(tuple(cands), corr.values, float(np.median(profile.p_hi)), n)
    if log is not None:
        for c in pool.jmim_order():
            log.append(Decision(c.channel, "considered", "pool:" + "+".join(c.sources), c.metrics()))
    return pool


def _max_corr_with(pool: CandidatePool, ch: int, others) -> float:
    others = [o for o in others if o != ch]
    if not others:
        return 0.0
    return float(np.max(np.abs(pool.corr[ch, others])))


def informed_select(pool: CandidatePool, cfg: SelectionConfig, log: list[Decision] | None = None) -> list[int]:
    """Greedy pass over the pool in JMIM order.

    A band is accepted when its |correlation| with every accepted band is at
    most ``corr_threshold`` and its p_hi is at least the profile median.
    Relaxation ladder when short: drop the p_hi clause, then raise the
    correlation threshold in steps of 0.1.
    """
    if len(pool) == 0:
        raise SelectionError("candidate pool is empty")
    log = [] if log is None else log
    order = pool.jmim_order()
    accepted: list[int] = []
    use_phi = True
    thr = cfg.corr_threshold

    while True:
        for c in order:
            if len(accepted) >= cfg.n_select:
                break
            if c.channel in accepted:
                continue
            mc = _max_corr_with(pool, c.channel, accepted)
            metrics = {**c.metrics(), "max_corr_accepted": _r(mc), "corr_threshold": _r(thr)}
            if mc > thr:
                log.append(Decision(c.channel, "rejected", f"correlation {mc:.4f} > {thr:.2f} with accepted set", metrics))
            elif use_phi and c.p_hi < pool.p_hi_median:
                log.append(
                    Decision(c.channel, "rejected", f"p_hi {c.p_hi:.4f} below median {pool.p_hi_median:.4f}", metrics)
                )
            else:
                accepted.append(c.channel)
                log.append(Decision(c.channel, "accepted", "meets correlation and CSNR criteria", metrics))
        if len(accepted) >= cfg.n_select:
            return accepted
        if use_phi:
            use_phi = False
            log.append(Decision(None, "relaxed", "dropped p_hi clause", {"corr_threshold": _r(thr)}))
        elif thr < 1.0:
            thr = round(thr + 0.1, 10)
            log.append(Decision(None, "relaxed", f"raised corr_threshold to {thr:.2f}", {"corr_threshold": _r(thr)}))
        else:
            raise SelectionError(f"pool of {len(pool)} bands cannot supply {cfg.n_select} selections")


@dataclass
class SelectionResult:
    channels: list[int]
    wavelengths_nm: list[float]
    log: list[Decision]
    config: dict = field(default_factory=dict)

    @property
    def relaxed(self) -> bool:
        return any(d.action == "relaxed" for d in self.log)

    def to_dict(self) -> dict:
        return {
            "channels": [int(c) for c in self.channels],
            "wavelengths_nm": [float(w) for w in self.wavelengths_nm],
            "config": self.config,
            "log": [d.to_dict() for d in self.log],
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, path: str | Path) -> "SelectionResult":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"selection file not found: {path}")
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
            log = [Decision(x["channel"], x["action"], x["reason"], x.get("metrics", {})) for x in d.get("log", [])]
            return cls([int(c) for c in d["channels"]], [float(w) for w in d.get("wavelengths_nm", [])], log, d.get("config", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed selection file {path}: {exc}") from exc


def diversity_refine(
    provisional: list[int],
    corr: CorrelationMatrix | np.ndarray,
    pool: CandidatePool,
    cfg: SelectionConfig,
    wavelengths_nm=None,
    log: list[Decision] | None = None,
) -> SelectionResult:
    """Replace one member of each adjacent, highly correlated pair.

    The higher-JMIM member is kept.  Replacements are pool bands within
    ``search_radius`` channels of the kept band whose |correlation| with all
    remaining selections is within threshold; the lowest such correlation
    wins, then the higher p_hi, then the lower channel.
    """
    log = [] if log is None else log
    cm = np.abs(corr.values if isinstance(corr, CorrelationMatrix) else np.asarray(corr))
    current = list(provisional)
    if len(current) != cfg.n_select:
        raise ValidationError(f"provisional set has {len(current)} channels, expected {cfg.n_select}")
    dropped: set[int] = set()
    unresolved: set[tuple[int, int]] = set()
    pool_channels = set(pool.channels)

    def conflicts():
        out = []
        for i, a in enumerate(current):
            for b in current[i + 1 :]:
                pair = (min(a, b), max(a, b))
                if pair in unresolved:
                    continue
                if abs(a - b) <= cfg.adjacency_window and cm[a, b] > cfg.corr_threshold:
                    out.append(pair)
        return sorted(out)

    changed = False
    while True:
        todo = conflicts()
        if not todo:
            break
        a, b = todo[0]
        keep, drop = (a, b) if pool.priority(a) <= pool.priority(b) else (b, a)
        rest = [c for c in current if c != drop]
        best = None
        for cand in sorted(pool_channels):
            if cand in current or cand in dropped or abs(cand - keep) > cfg.search_radius:
                continue
            mc = float(np.max(cm[cand, rest])) if rest else 0.0
            if mc > cfg.corr_threshold:
                continue
            p = pool.get(cand).p_hi if cand in pool_channels else 0.0
            key = (mc, -p, cand)
            if best is None or key < best[0]:
                best = (key, cand)
        pair_metrics = {"corr": _r(cm[a, b]), "kept": keep}
        if best is None:
            unresolved.add((a, b))
            log.append(Decision(drop, "rejected", f"no qualifying replacement near channel {keep}; kept with warning", pair_metrics))
            logger.warning("no qualifying replacement for channel %d (adjacent to %d)", drop, keep)
            continue
        (mc, neg_p, _), new = best
        dropped.add(drop)
        current[current.index(drop)] = new
        changed = True
        log.append(
            Decision(drop, "replaced", f"adjacent to {keep} with correlation {cm[a, b]:.4f}; replaced by {new}", pair_metrics)
        )
        log.append(
            Decision(new, "accepted", f"replacement near channel {keep}", {"max_corr_selected": _r(mc), "p_hi": _r(-neg_p)})
        )
    if not changed and not unresolved:
        log.append(Decision(None, "stable", "no adjacent correlated pairs", {}))

    channels = sorted(current)
    wl = [] if wavelengths_nm is None else [float(wavelengths_nm[c]) for c in channels]
    return SelectionResult(channels, wl, log, cfg.to_dict())


@dataclass
class SelectionRun:
    """Everything a selection run computed, kept for export."""

    result: SelectionResult
    scores: BandScoreTable
    corr: CorrelationMatrix
    table: CsnrTable
    profile: CsnrProfile
    pool: CandidatePool | None


def run_selection(cube: SpectralCube, patches: PatchSet, cfg: SelectionConfig | None = None) -> SelectionRun:
    cfg = cfg or SelectionConfig()
    cfg.check_bands(cube.n_bands)
    patches.validate_within(cube.rows, cube.cols)
    if patches.n_classes < 2:
        raise SelectionError("selection needs patches from at least two classes")

    identity = cfg.n_select == cube.n_bands
    samples, labels = pool_patch_samples(cube, patches)
    # the identity selection needs no JMIM ordering beyond the first pick
    k = 1 if identity else cfg.k_candidates
    scores = score_bands(samples, labels, k, cfg.bins, cube.wavelengths)
    corr = correlation_matrix(cube.pixels(cfg.max_corr_pixels))
    table = csnr_table(cube, patches, cfg.draws, cfg.seed, cfg.background)
    profile = csnr_high_probability(table, cfg.csnr_percentile)

    log: list[Decision] = []
    if identity:
        logger.warning("selection is identity: n_select equals the band count")
        for ch in range(cube.n_bands):
            log.append(Decision(ch, "accepted", "selection is identity", {}))
        res = SelectionResult(list(range(cube.n_bands)), [float(w) for w in cube.wavelengths], log, cfg.to_dict())
        return SelectionRun(res, scores, corr, table, profile, None)

    pool = candidate_pool(scores, corr, profile, cfg, log)
    provisional = informed_select(pool, cfg, log)
    res = diversity_refine(provisional, corr, pool, cfg, cube.wavelengths, log)
    return SelectionRun(res, scores, corr, table, profile, pool)


def select_bands(cube: SpectralCube, patches: PatchSet, cfg: SelectionConfig | None = None) -> SelectionResult:
    return run_selection(cube, patches, cfg).result
