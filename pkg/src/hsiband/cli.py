"""Command-line entry point: ``hsiband select|composite|evaluate|synth|heatmap``.

Exit codes: 0 on success, 2 for usage or validation errors, 1 for anything
unexpected.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from hsiband.composite import ChannelMapping, read_png, reconstruct_composite, write_png
from hsiband.cube_io import load_cube, load_patchset, save_cube, save_patchset
from hsiband.errors import HsiError, ValidationError
from hsiband.evalmetrics import aggregate_report, evaluate_pairs, read_records_csv
from hsiband.selector import SelectionConfig, SelectionResult, run_selection
from hsiband.synthgen import default_scene_spec, generate_scene, load_scene_spec

logger = logging.getLogger("hsiband")


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"config file {p} must hold a JSON object")
    return cfg


def _run_config(args, **extra) -> dict:
    # the output directory is left out so identical runs into different
    # directories produce identical bytes
    skip = {"func", "out", "verbose"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    cfg.update(extra)
    return cfg


def cmd_select(args) -> int:
    file_cfg = _read_config(args.config)
    sel = dict(file_cfg.get("selection", {}))
    for key, attr in [
        ("n_select", "n_select"),
        ("corr_threshold", "corr_threshold"),
        ("csnr_percentile", "csnr_percentile"),
        ("seed", "seed"),
        ("k_candidates", "k_candidates"),
        ("bins", "bins"),
        ("draws", "draws"),
        ("background", "background"),
    ]:
        val = getattr(args, attr)
        if val is not None:
            sel[key] = val
    cube_path = args.cube or file_cfg.get("cube")
    patch_path = args.patches or file_cfg.get("patches")
    if not cube_path or not patch_path:
        raise ValidationError("select needs --cube and --patches")
    cube = load_cube(cube_path)
    patches = load_patchset(patch_path)
    n_sel = sel.get("n_select", SelectionConfig.n_select)
    if n_sel > sel.get("k_candidates", SelectionConfig.k_candidates):
        sel["k_candidates"] = n_sel
    cfg = SelectionConfig.from_dict(sel)
    if cfg.n_select == cube.n_bands:
        print("warning: selection is identity", file=sys.stderr)

    run = run_selection(cube, patches, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run.result
    result.config = {**cfg.to_dict(), "run": _run_config(args)}
    result.to_json(out / "selection.json")
    run.scores.to_csv(out / "band_scores.csv")
    run.corr.to_csv(out / "correlation.csv")
    run.table.to_csv(out / "csnr_table.csv")
    run.profile.to_csv(out / "csnr_profile.csv", cube.wavelengths)
    print(f"selected channels {result.channels} ({', '.join(f'{w:.1f}' for w in result.wavelengths_nm)} nm)")
    return 0


def cmd_composite(args) -> int:
    sel = SelectionResult.from_json(args.selection)
    if len(sel.channels) != 3:
        raise ValidationError(f"mapping requires 3 channels, selection has {len(sel.channels)}")
    cube = load_cube(args.cube)
    mapping = ChannelMapping.from_channels(sel.channels, args.half_width)
    image = reconstruct_composite(cube, mapping)
    image.provenance["run"] = _run_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    image.save(out / "composite.png")
    print(f"composite {image.pixels.shape[1]}x{image.pixels.shape[0]} written to {out / 'composite.png'}")
    return 0


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    if args.records:
        rgb, comp = read_records_csv(args.records)
    else:
        if not (args.rgb and args.composite and args.patches):
            raise ValidationError("evaluate needs --records, or --rgb, --composite and --patches")
        rgb_img, comp_img = read_png(args.rgb), read_png(args.composite)
        if rgb_img.shape != comp_img.shape:
            raise ValidationError(f"image dimension mismatch: {rgb_img.shape} vs {comp_img.shape}")
        patches = load_patchset(args.patches)
        rgb = evaluate_pairs(rgb_img, patches, args.background, "rgb")
        comp = evaluate_pairs(comp_img, patches, args.background, "composite")
    report = aggregate_report(rgb, comp)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    doc["run"] = _run_config(args)
    _dump(doc, out / "report.json")
    report.to_csv(out / "report.csv")
    for m, v in report.improvement_pct.items():
        a = report.averages
        print(f"{m:>3}: rgb {a['rgb'][m]:.4f}  composite {a['composite'][m]:.4f}  improvement {v:.2f}%")
    return 0


def cmd_synth(args) -> int:
    spec = load_scene_spec(args.spec) if args.spec else default_scene_spec()
    if args.seed is not None:
        spec = default_scene_spec(**{**spec.source, "seed": args.seed})
    scene = generate_scene(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_cube(scene.cube, out / "scene.hdr", description="synthetic metamer scene")
    save_patchset(scene.patches, out / "patches.csv")
    write_png(scene.rgb, out / "rgb.png")
    summary = scene.summary()
    _dump({"spec": spec.source, "summary": summary, "run": _run_config(args)}, out / "scene.json")
    for k, v in summary.items():
        print(f"{k}: {v}")
    return 0


def read_matrix_csv(path: str | Path) -> np.ndarray:
    """Numeric CSV, optionally with a header row and a leading label column."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"matrix file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValidationError(f"matrix file {path} is empty")

    def numeric(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    labelled = not all(numeric(c) for c in rows[0])
    if labelled:
        rows = [r[1:] for r in rows[1:]]
    widths = {len(r) for r in rows}
    if len(widths) != 1 or not rows or 0 in widths:
        raise ValidationError(f"matrix file {path} is ragged")
    try:
        return np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"matrix file {path} has non-numeric cells") from exc


def render_heatmap(matrix: np.ndarray) -> np.ndarray:
    """Min-max normalized 8-bit grayscale; a constant matrix renders mid-gray."""
    m = np.asarray(matrix, dtype=np.float64)
    lo, hi = np.nanmin(m), np.nanmax(m)
    if hi - lo < 1e-12:
        return np.full(m.shape, 128, dtype=np.uint8)
    return np.floor((m - lo) / (hi - lo) * 255 + 0.5).astype(np.uint8)


def cmd_heatmap(args) -> int:
    img = render_heatmap(read_matrix_csv(args.matrix))
    write_png(img, Path(args.out))
    print(f"heatmap {img.shape[1]}x{img.shape[0]} written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsiband", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="pick a band subset from a cube and labeled patches")
    p.add_argument("--cube", help="ENVI-style header of the cube")
    p.add_argument("--patches", help="patch CSV (label,class,x,y,w,h)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config; flags override it")
    p.add_argument("--n-select", type=int)
    p.add_argument("--k-candidates", type=int)
    p.add_argument("--corr-threshold", type=float)
    p.add_argument("--csnr-percentile", type=float)
    p.add_argument("--bins", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--background", help="label of the background patch")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("composite", help="render a pseudo-colour composite from a selection")
    p.add_argument("--cube", required=True)
    p.add_argument("--selection", required=True, help="selection.json written by 'select'")
    p.add_argument("--out", required=True)
    p.add_argument("--half-width", type=int, default=7)
    p.add_argument("--seed", type=int, default=0, help="recorded for provenance only")
    p.set_defaults(func=cmd_composite)

    p = sub.add_parser("evaluate", help="patch-pair metrics for RGB vs composite")
    p.add_argument("--rgb")
    p.add_argument("--composite")
    p.add_argument("--patches")
    p.add_argument("--background", help="label of the background patch")
    p.add_argument("--records", help="CSV of precomputed per-pair metrics")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0, help="recorded for provenance only")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic metamer scene")
    p.add_argument("--spec", help="scene spec JSON (defaults to the built-in scene)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("heatmap", help="grayscale PNG of a numeric CSV matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (HsiError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
