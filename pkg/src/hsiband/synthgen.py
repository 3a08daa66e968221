"""Synthetic scenes with planted RGB metamers.

The simulated RGB camera has an IR cut: its response is exactly zero above
750 nm.  Adding reflectance only in that region therefore changes a
material's spectrum without changing its RGB colour, which gives exact,
testable metamer pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hsiband.composite import quantize_8bit
from hsiband.cube_io import LabeledPatch, PatchSet, SpectralCube, WavelengthAxis
from hsiband.errors import ValidationError

__all__ = [
    "SensorModel",
    "NirBump",
    "MetamerPair",
    "PlacedPatch",
    "SceneSpec",
    "Scene",
    "build_sensor_model",
    "make_metamer_pair",
    "generate_scene",
    "default_scene_spec",
    "scene_spec_from_dict",
    "load_scene_spec",
    "srgb_encode",
]

IR_CUT_NM = 750.0
# (centre nm, sigma nm) for R, G, B
SENSOR_CURVES = ((600.0, 55.0), (540.0, 50.0), (460.0, 40.0))


@dataclass(frozen=True)
class SensorModel:
    response: np.ndarray  # (3, n_bands), rows R, G, B
    axis: WavelengthAxis

    def project(self, spectra: np.ndarray) -> np.ndarray:
        """RGB linear values for spectra laid out with bands on the last axis."""
        return np.asarray(spectra, dtype=np.float64) @ self.response.T

    @property
    def blind(self) -> np.ndarray:
        """Mask of channels with zero response in every colour channel."""
        return ~np.any(self.response > 0, axis=0)


def build_sensor_model(axis: WavelengthAxis) -> SensorModel:
    wl = axis.wavelengths_nm
    if wl[0] > 450.0 or wl[-1] < 700.0:
        raise ValidationError(f"axis [{wl[0]}, {wl[-1]}] nm does not span 450-700 nm")
    rows = []
    for centre, sigma in SENSOR_CURVES:
        r = np.exp(-0.5 * ((wl - centre) / sigma) ** 2)
        r[wl > IR_CUT_NM] = 0.0
        rows.append(r / r.sum())
    resp = np.vstack(rows)
    if np.linalg.matrix_rank(resp) != 3:
        raise ValidationError("sensor response is rank deficient on this axis")
    return SensorModel(resp, axis)


@dataclass(frozen=True)
class NirBump:
    center: int
    width: float = 0.0  # Gaussian sigma in channels; 0 means a single channel
    amplitude: float = 0.3

    def profile(self, n_bands: int) -> np.ndarray:
        k = np.arange(n_bands)
        if self.width <= 0:
            return np.where(k == self.center, float(self.amplitude), 0.0)
        out = np.zeros(n_bands)
        near = np.abs(k - self.center) <= 3 * self.width
        out[near] = self.amplitude * np.exp(-0.5 * ((k[near] - self.center) / self.width) ** 2)
        return out


@dataclass(frozen=True)
class MetamerPair:
    spectrum_a: np.ndarray
    spectrum_b: np.ndarray
    bump: NirBump

    @property
    def nir_separation(self) -> float:
        return float(np.max(np.abs(self.spectrum_a - self.spectrum_b)))


def make_metamer_pair(
    sensor: SensorModel, base, nir_bump: NirBump, min_separation: float = 0.2
) -> MetamerPair:
    """``a = base``; ``b`` adds the bump minus its projection on the sensor row space."""
    n = sensor.response.shape[1]
    a = np.broadcast_to(np.asarray(base, dtype=np.float64), (n,)).copy()
    if np.any(a < 0) or np.any(a > 1):
        raise ValidationError("base spectrum must lie in [0, 1]")
    if not 0 <= nir_bump.center < n:
        raise ValidationError(f"bump centre {nir_bump.center} outside the axis")
    bump = nir_bump.profile(n)
    if np.any((bump != 0) & ~sensor.blind):
        raise ValidationError("bump overlaps channels with nonzero sensor response")
    R = sensor.response
    proj = R.T @ np.linalg.solve(R @ R.T, R @ bump)
    b = a + bump - proj
    if np.any(b < 0) or np.any(b > 1):
        raise ValidationError("metamer would need clipping; lower the bump amplitude or the base level")
    if np.max(np.abs(R @ (a - b))) > 1e-9:
        raise ValidationError("constructed pair is not RGB-metameric")
    sep = float(np.max(np.abs(a - b)[sensor.blind]))
    if sep < min_separation - 1e-12:  # (base + amp) - base can round below amp
        raise ValidationError(f"NIR separation {sep:.4g} below required {min_separation}")
    return MetamerPair(a, b, nir_bump)


@dataclass(frozen=True)
class PlacedPatch:
    label: str
    class_name: str
    rect: tuple[int, int, int, int]
    spectrum: np.ndarray


@dataclass(frozen=True)
class SceneSpec:
    rows: int
    cols: int
    axis: WavelengthAxis
    background: np.ndarray
    background_rect: tuple[int, int, int, int]
    patches: tuple[PlacedPatch, ...] = ()
    noise_sigma: float = 0.005
    seed: int = 0
    bump: NirBump | None = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValidationError("noise sigma must be >= 0")
        for label, rect in [("background", self.background_rect)] + [(p.label, p.rect) for p in self.patches]:
            x, y, w, h = rect
            if x < 0 or y < 0 or w < 1 or h < 1 or x + w > self.cols or y + h > self.rows:
                raise ValidationError(f"rect {rect} of {label!r} outside the {self.rows}x{self.cols} scene")


@dataclass
class Scene:
    cube: SpectralCube
    patches: PatchSet
    rgb: np.ndarray  # (rows, cols, 3) uint8
    spec: SceneSpec
    metamer: MetamerPair | None = None

    def summary(self) -> dict:
        out = {
            "rows": self.spec.rows,
            "cols": self.spec.cols,
            "bands": self.cube.n_bands,
            "patches": [p.label for p in self.patches],
            "seed": self.spec.seed,
            "noise_sigma": self.spec.noise_sigma,
        }
        if self.metamer is not None:
            b = self.metamer.bump
            out["planted_channel"] = int(b.center)
            out["planted_wavelength_nm"] = float(self.cube.wavelengths[b.center])
            out["nir_separation"] = round(self.metamer.nir_separation, 12)
        return out


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * v ** (1 / 2.4) - 0.055)


def generate_scene(spec: SceneSpec, sensor: SensorModel | None = None) -> Scene:
    """Render the cube, patch set and 8-bit RGB view of ``spec``."""
    sensor = sensor or build_sensor_model(spec.axis)
    n = len(spec.axis)
    clean = np.broadcast_to(spec.background, (spec.rows, spec.cols, n)).copy()
    for p in spec.patches:
        x, y, w, h = p.rect
        clean[y : y + h, x : x + w, :] = p.spectrum
    rng = np.random.default_rng(spec.seed)
    noisy = clean + rng.normal(0.0, spec.noise_sigma, clean.shape) if spec.noise_sigma > 0 else clean
    noisy = np.clip(noisy, 0.0, 1.0).astype(np.float32)
    cube = SpectralCube(np.ascontiguousarray(np.moveaxis(noisy, -1, 0)), spec.axis, (0.0, 1.0))

    rgb = quantize_8bit(srgb_encode(sensor.project(noisy.astype(np.float64))))

    class_ids: dict[str, int] = {}
    labeled = []
    for p in spec.patches:
        labeled.append(LabeledPatch(p.label, class_ids.setdefault(p.class_name, len(class_ids)), p.rect))
    labeled.append(LabeledPatch("background", class_ids.setdefault("background", len(class_ids)), spec.background_rect))
    patches = PatchSet(tuple(labeled), {v: k for k, v in class_ids.items()})

    metamer = None
    if spec.bump is not None and spec.patches:
        metamer = MetamerPair(np.asarray(spec.background, float), np.asarray(spec.patches[0].spectrum, float), spec.bump)
    return Scene(cube, patches, rgb, spec, metamer)


DEFAULT_SCENE = {
    "rows": 64,
    "cols": 64,
    "wavelength_range": [450.0, 950.0],
    "bands": 128,
    "background": 0.4,
    "background_rect": [40, 40, 10, 10],
    "patches": [
        {
            "label": "target",
            "class": "cloth",
            "rect": [12, 12, 10, 10],
            "metamer": {"center": 114, "width": 0.0, "amplitude": 0.3},
        }
    ],
    "noise_sigma": 0.005,
    "seed": 0,
}


def scene_spec_from_dict(d: dict, sensor: SensorModel | None = None) -> SceneSpec:
    """Build a :class:`SceneSpec` from its JSON form.

    A patch gives either ``spectrum`` (scalar or per-band list) or
    ``metamer`` (a NIR bump added to the background spectrum).
    """
    merged = {**DEFAULT_SCENE, **d}
    try:
        if "wavelengths" in merged:
            axis = WavelengthAxis(np.asarray(merged["wavelengths"], dtype=float))
        else:
            lo, hi = merged["wavelength_range"]
            axis = WavelengthAxis.uniform(float(lo), float(hi), int(merged["bands"]))
        n = len(axis)
        sensor = sensor or build_sensor_model(axis)
        background = np.broadcast_to(np.asarray(merged["background"], dtype=float), (n,)).copy()
        placed, bump = [], None
        for i, p in enumerate(merged["patches"]):
            if "metamer" in p:
                m = p["metamer"]
                nb = NirBump(int(m["center"]), float(m.get("width", 0.0)), float(m.get("amplitude", 0.3)))
                pair = make_metamer_pair(sensor, background, nb, float(m.get("min_separation", 0.2)))
                spectrum = pair.spectrum_b
                bump = bump or nb
            else:
                spectrum = np.broadcast_to(np.asarray(p["spectrum"], dtype=float), (n,)).copy()
            placed.append(PlacedPatch(str(p.get("label", f"patch{i}")), str(p.get("class", "object")), tuple(int(v) for v in p["rect"]), spectrum))
        return SceneSpec(
            rows=int(merged["rows"]),
            cols=int(merged["cols"]),
            axis=axis,
            background=background,
            background_rect=tuple(int(v) for v in merged["background_rect"]),
            patches=tuple(placed),
            noise_sigma=float(merged["noise_sigma"]),
            seed=int(merged["seed"]),
            bump=bump,
            source=merged,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"invalid scene spec: {exc}") from exc


def default_scene_spec(**overrides) -> SceneSpec:
    return scene_spec_from_dict(dict(overrides))


def load_scene_spec(path: str | Path) -> SceneSpec:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"scene spec not found: {path}")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scene spec {path} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ValidationError(f"scene spec {path} must be a JSON object")
    return scene_spec_from_dict(d)
