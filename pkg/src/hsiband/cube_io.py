"""Hyperspectral cube and labeled-patch I/O.

Cubes live on disk as an ENVI-style pair: a ``key = value`` text header and a
raw little-endian float32 payload in band-sequential (BSQ) order.  In memory a
cube is a ``(bands, rows, cols)`` array normalized to [0, 1] together with its
wavelength axis.

Patch files are CSV with the header ``label,class,x,y,w,h`` where ``x`` is the
column and ``y`` the row of the top-left pixel.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from hsiband.errors import ValidationError

__all__ = [
    "WavelengthAxis",
    "SpectralCube",
    "LabeledPatch",
    "PatchSet",
    "load_cube",
    "save_cube",
    "wavelength_to_channel",
    "extract_patch_samples",
    "load_patchset",
    "save_patchset",
    "pool_patch_samples",
]

logger = logging.getLogger(__name__)

PATCH_HEADER = ["label", "class", "x", "y", "w", "h"]
_FLOAT32_TYPES = {"4", "float32", "float", "f4", "<f4"}
_LITTLE_ENDIAN = {"0", "little", "little-endian", "le"}
_RAW_SUFFIXES = (".raw", ".img", ".bin", ".dat", "")


@dataclass(frozen=True)
class WavelengthAxis:
    """Strictly increasing band-centre wavelengths in nanometres."""

    wavelengths_nm: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths_nm, dtype=np.float64).reshape(-1)
        if wl.size == 0:
            raise ValidationError("wavelength axis is empty")
        if not np.all(np.isfinite(wl)) or np.any(wl <= 0):
            raise ValidationError("wavelengths must be finite and positive")
        if wl.size > 1 and np.any(np.diff(wl) <= 0):
            raise ValidationError("wavelengths must be strictly increasing")
        wl.setflags(write=False)
        object.__setattr__(self, "wavelengths_nm", wl)

    @classmethod
    def uniform(cls, start_nm: float, stop_nm: float, n_bands: int) -> "WavelengthAxis":
        return cls(np.linspace(start_nm, stop_nm, n_bands))

    def __len__(self) -> int:
        return int(self.wavelengths_nm.size)

    def __getitem__(self, k):
        return self.wavelengths_nm[k]

    @property
    def mean_spacing(self) -> float:
        if len(self) < 2:
            return 0.0
        return float((self.wavelengths_nm[-1] - self.wavelengths_nm[0]) / (len(self) - 1))


@dataclass(frozen=True)
class SpectralCube:
    """Reflectance volume laid out as (bands, rows, cols).

    ``value_range`` records the radiometric scale the data was normalized
    from; after :func:`load_cube` the data itself always lies in [0, 1].
    """

    data: np.ndarray
    axis: WavelengthAxis
    value_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValidationError(f"cube data must be 3-D (bands, rows, cols), got shape {data.shape}")
        if data.shape[0] != len(self.axis):
            raise ValidationError(
                f"axis length mismatch: {data.shape[0]} bands but {len(self.axis)} wavelengths"
            )
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise ValidationError("cube must have at least one row and one column")
        if not np.all(np.isfinite(data)):
            raise ValidationError("cube contains NaN or Inf values")
        if data.flags.writeable:
            data = data.copy()
            data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "value_range", (float(self.value_range[0]), float(self.value_range[1])))

    @property
    def n_bands(self) -> int:
        return self.data.shape[0]

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    @property
    def wavelengths(self) -> np.ndarray:
        return self.axis.wavelengths_nm

    def pixels(self, max_pixels: int | None = None) -> np.ndarray:
        """All pixel spectra as an (n_pixels, n_bands) matrix, row-major.

        With ``max_pixels`` set, a fixed stride subsample is returned so the
        result stays deterministic.
        """
        flat = self.data.reshape(self.n_bands, -1).T
        if max_pixels is not None and flat.shape[0] > max_pixels:
            step = int(np.ceil(flat.shape[0] / max_pixels))
            flat = flat[::step]
        return flat


@dataclass(frozen=True)
class LabeledPatch:
    label: str
    class_id: int
    rect: tuple[int, int, int, int]  # x (col), y (row), width, height

    def __post_init__(self):
        x, y, w, h = (int(v) for v in self.rect)
        if w < 1 or h < 1:
            raise ValidationError(f"patch {self.label!r}: width and height must be >= 1")
        if x < 0 or y < 0:
            raise ValidationError(f"patch {self.label!r}: negative origin")
        object.__setattr__(self, "rect", (x, y, w, h))

    @property
    def area(self) -> int:
        return self.rect[2] * self.rect[3]

    def fits(self, rows: int, cols: int) -> bool:
        x, y, w, h = self.rect
        return x + w <= cols and y + h <= rows


@dataclass(frozen=True)
class PatchSet:
    patches: tuple[LabeledPatch, ...]
    class_names: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        patches = tuple(self.patches)
        seen = set()
        for p in patches:
            if p.label in seen:
                raise ValidationError(f"duplicate label {p.label!r}")
            seen.add(p.label)
        object.__setattr__(self, "patches", patches)

    def __len__(self) -> int:
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    @property
    def class_ids(self) -> list[int]:
        return sorted({p.class_id for p in self.patches})

    @property
    def n_classes(self) -> int:
        return len(self.class_ids)

    def get(self, label: str) -> LabeledPatch:
        for p in self.patches:
            if p.label == label:
                return p
        raise ValidationError(f"no patch labelled {label!r}")

    def class_name(self, patch: LabeledPatch) -> str:
        return self.class_names.get(patch.class_id, str(patch.class_id))

    def find_background(self, label: str | None = None) -> LabeledPatch:
        """Return the background patch.

        An explicit ``label`` wins; otherwise the first patch whose class name
        is ``background`` or ``asphalt`` is used.
        """
        if label is not None:
            return self.get(label)
        for p in self.patches:
            if self.class_name(p).lower() in ("background", "asphalt"):
                return p
        raise ValidationError("no background patch found; pass the background label explicitly")

    def validate_within(self, rows: int, cols: int) -> None:
        for p in self.patches:
            if not p.fits(rows, cols):
                raise ValidationError(
                    f"patch {p.label!r} rect {p.rect} lies outside the {rows}x{cols} image"
                )


def wavelength_to_channel(axis: WavelengthAxis, lambda_nm: float) -> int:
    """Index of the axis entry nearest to ``lambda_nm`` (ties go to the lower index)."""
    wl = axis.wavelengths_nm
    half = 0.5 * axis.mean_spacing
    if not (wl[0] - half <= lambda_nm <= wl[-1] + half):
        raise ValidationError(
            f"wavelength {lambda_nm} nm outside axis range [{wl[0]}, {wl[-1]}] nm"
        )
    # argmin returns the first minimum, which is the lower index on ties
    return int(np.argmin(np.abs(wl - lambda_nm)))


def extract_patch_samples(cube: SpectralCube, patch: LabeledPatch) -> np.ndarray:
    """Pixel spectra inside ``patch`` as an (n_pixels, n_bands) float64 matrix.

    Pixels are enumerated row-major from the top-left corner.
    """
    if not patch.fits(cube.rows, cube.cols):
        raise ValidationError(
            f"patch {patch.label!r} rect {patch.rect} out of bounds for {cube.rows}x{cube.cols} cube"
        )
    x, y, w, h = patch.rect
    block = cube.data[:, y : y + h, x : x + w]
    return block.reshape(cube.n_bands, w * h).T.astype(np.float64)


def pool_patch_samples(cube: SpectralCube, patches: PatchSet) -> tuple[np.ndarray, np.ndarray]:
    """Stack every patch's pixels; returns ``(samples, class_ids)``."""
    blocks, labels = [], []
    for p in patches:
        s = extract_patch_samples(cube, p)
        blocks.append(s)
        labels.append(np.full(s.shape[0], p.class_id, dtype=np.int64))
    return np.vstack(blocks), np.concatenate(labels)


# ---------------------------------------------------------------------------
# ENVI-style header handling


def _parse_header(text: str) -> dict[str, str]:
    # Joins brace blocks that span several lines before splitting on '='.
    fields: dict[str, str] = {}
    buf = ""
    for raw in text.splitlines():
        line = raw.strip()
        if not buf and (not line or line.upper() == "ENVI" or line.startswith(";")):
            continue
        buf = f"{buf} {line}" if buf else line
        if buf.count("{") > buf.count("}"):
            continue
        if "=" not in buf:
            raise ValidationError(f"garbled header line: {buf!r}")
        key, value = buf.split("=", 1)
        key = re.sub(r"[\s_]+", "_", key.strip().lower())
        fields[key] = value.strip()
        buf = ""
    if buf:
        raise ValidationError("unterminated '{' block in header")
    return fields


def _brace_list(value: str) -> list[float]:
    inner = value.strip()
    if inner.startswith("{") and inner.endswith("}"):
        inner = inner[1:-1]
    try:
        return [float(v) for v in inner.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"non-numeric entry in list {value!r}") from exc


def _require_int(fields: dict[str, str], key: str) -> int:
    if key not in fields:
        raise ValidationError(f"header missing required field '{key}'")
    try:
        val = int(fields[key])
    except ValueError as exc:
        raise ValidationError(f"header field '{key}' is not an integer: {fields[key]!r}") from exc
    if val < 1:
        raise ValidationError(f"header field '{key}' must be >= 1")
    return val


def _locate_payload(header_path: Path, fields: dict[str, str]) -> Path:
    if "data_file" in fields:
        p = Path(fields["data_file"].strip().strip("{}").strip())
        return p if p.is_absolute() else header_path.parent / p
    for suffix in _RAW_SUFFIXES:
        cand = header_path.with_suffix(suffix)
        if cand != header_path and cand.exists():
            return cand
    raise ValidationError(f"no raw payload found next to {header_path}")


def load_cube(header_path: str | Path) -> SpectralCube:
    """Read an ENVI-style BSQ float32 cube and normalize it to [0, 1]."""
    header_path = Path(header_path)
    if not header_path.exists():
        raise ValidationError(f"header file not found: {header_path}")
    fields = _parse_header(header_path.read_text(encoding="utf-8"))

    samples = _require_int(fields, "samples")
    lines = _require_int(fields, "lines")
    bands = _require_int(fields, "bands")

    interleave = fields.get("interleave", "").strip().lower()
    if interleave != "bsq":
        raise ValidationError(f"unsupported interleave {interleave or '<missing>'!r}; only 'bsq' is accepted")
    dtype = fields.get("data_type", "").strip().lower()
    if dtype not in _FLOAT32_TYPES:
        raise ValidationError(f"unsupported data type {dtype or '<missing>'!r}; expected 32-bit float")
    order = fields.get("byte_order", "").strip().lower()
    if order not in _LITTLE_ENDIAN:
        raise ValidationError(f"unsupported byte order {order or '<missing>'!r}; expected little-endian")
    if "wavelength" not in fields:
        raise ValidationError("header missing required field 'wavelength'")
    wavelengths = _brace_list(fields["wavelength"])
    if len(wavelengths) != bands:
        raise ValidationError(
            f"axis length mismatch: bands={bands} but {len(wavelengths)} wavelengths listed"
        )
    axis = WavelengthAxis(np.asarray(wavelengths))

    payload = _locate_payload(header_path, fields)
    offset = int(fields.get("header_offset", "0") or 0)
    raw = np.fromfile(payload, dtype="<f4", offset=offset)
    expected = samples * lines * bands
    if raw.size != expected:
        raise ValidationError(f"payload {payload} holds {raw.size} values, expected {expected}")
    if not np.all(np.isfinite(raw)):
        raise ValidationError(f"payload {payload} contains NaN or Inf values")
    data = raw.reshape(bands, lines, samples)

    if "value_range" in fields:
        lo_hi = _brace_list(fields["value_range"])
        if len(lo_hi) != 2 or not lo_hi[1] > lo_hi[0]:
            raise ValidationError(f"bad value range {fields['value_range']!r}")
        lo, hi = lo_hi
    else:
        lo, hi = float(data.min()), float(data.max())
        logger.warning("no value range declared in %s; using observed [%g, %g]", header_path, lo, hi)
        if hi <= lo:
            hi = lo + 1.0

    if lo == 0.0 and hi == 1.0:
        norm = np.clip(data, 0.0, 1.0).astype(np.float32)
    else:
        norm = np.clip((data.astype(np.float64) - lo) / (hi - lo), 0.0, 1.0).astype(np.float32)
    return SpectralCube(norm, axis, (lo, hi))


def save_cube(cube: SpectralCube, header_path: str | Path, description: str = "") -> Path:
    """Write ``cube`` as a header plus ``.raw`` payload; returns the payload path."""
    header_path = Path(header_path)
    payload = header_path.with_suffix(".raw")
    header_path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(cube.data, dtype="<f4").tofile(payload)
    wl = ", ".join(repr(float(w)) for w in cube.wavelengths)
    lines = [
        "ENVI",
        f"description = {{{description}}}",
        f"samples = {cube.cols}",
        f"lines = {cube.rows}",
        f"bands = {cube.n_bands}",
        "header offset = 0",
        "file type = ENVI Standard",
        "data type = 4",
        "interleave = bsq",
        "byte order = 0",
        "value range = {0.0, 1.0}",
        "wavelength units = nm",
        f"wavelength = {{{wl}}}",
        f"data file = {payload.name}",
    ]
    header_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return payload


# ---------------------------------------------------------------------------
# Patch files


def load_patchset(path: str | Path) -> PatchSet:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"patch file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise ValidationError(f"patch file {path} is empty")
    header = [c.strip().lower() for c in rows[0]]
    if header != PATCH_HEADER:
        raise ValidationError(f"patch file {path}: expected header {','.join(PATCH_HEADER)}, got {rows[0]}")
    if len(rows) == 1:
        raise ValidationError(f"patch file {path} has no records")
    return _build_patchset(rows[1:], source=str(path))


def _build_patchset(records: Iterable[Sequence[str]], source: str = "<records>") -> PatchSet:
    class_ids: dict[str, int] = {}
    patches = []
    labels = set()
    for lineno, rec in enumerate(records, start=2):
        if len(rec) != 6:
            raise ValidationError(f"{source}:{lineno}: malformed record {list(rec)!r}")
        label, cname = rec[0].strip(), rec[1].strip()
        if not label or not cname:
            raise ValidationError(f"{source}:{lineno}: empty label or class")
        try:
            x, y, w, h = (int(v) for v in rec[2:])
        except ValueError as exc:
            raise ValidationError(f"{source}:{lineno}: non-integer rect in {list(rec)!r}") from exc
        if label in labels:
            raise ValidationError(f"{source}:{lineno}: duplicate label {label!r}")
        labels.add(label)
        cid = class_ids.setdefault(cname, len(class_ids))
        patches.append(LabeledPatch(label, cid, (x, y, w, h)))
    return PatchSet(tuple(patches), {v: k for k, v in class_ids.items()})


def save_patchset(patches: PatchSet, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PATCH_HEADER)
        for p in patches:
            writer.writerow([p.label, patches.class_name(p), *p.rect])
