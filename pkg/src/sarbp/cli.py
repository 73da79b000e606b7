"""Command-line entry point: simulate, reconstruct, compare, bench."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .backprojection import set_threads
from .grid import CARTESIAN, POLAR, SarImage, export_pgm, resample_to_cartesian, write_pgm
from .metrics import image_diff_db, region_snr, write_bench_csv, write_bench_summary
from .pipeline import MATRIX_LABELS, PipelineConfig, benchmark, measure_matrix, reconstruct, simulate
from .signal_model import ConfigError
from .simulator import BeatSpectrum, DataError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
DIFF_RANGE_DB = 20.0  # difference maps are drawn over +-20 dB


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out(args, default: str) -> Path:
    path = Path(args.out) if args.out else Path(default)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    cfg = _config(args)
    spec = simulate(cfg)
    out = _out(args, "spectrum.sarbp")
    spec.save(out)
    m, n, k = spec.dims
    print(f"wrote {out}: dims {m}x{n}x{k}, {out.stat().st_size} bytes")
    return EXIT_OK


def _snr(cfg: PipelineConfig, image):
    if not cfg.regions:
        return None
    return region_snr(image, cfg.regions, cfg.noise_region)


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    if not args.data:
        raise ConfigError("reconstruct needs --data")
    spec = BeatSpectrum.load(args.data)
    rec = reconstruct(cfg, spec)
    out = _out(args, "image.sarim")
    rec.image.save(out)
    export_pgm(rec.image, out.with_suffix(".pgm"), args.dynamic_range_db)
    side = rec.sidecar()
    shown = rec.image
    if rec.image.grid.kind == POLAR:
        shown = resample_to_cartesian(rec.image, rec.prepared.reference_grid)
    snr = _snr(cfg, shown)
    if snr is not None:
        side["snr_db"] = snr
    Path(str(out) + ".json").write_text(json.dumps(side, indent=2) + "\n")
    x, y = side["argmax_position"]
    print(f"wrote {out}: {side['pixel_count']} pixels, bp {side['bp_s']:.3f} s, "
          f"argmax ({x:.3f}, {y:.3f}) m, {side['bytes_prepared']} bytes prepared")
    return EXIT_OK


def _common_grid(a: SarImage, b: SarImage):
    """Bring both images onto one Cartesian grid."""
    if a.grid == b.grid:
        return a, b
    if a.grid.kind == POLAR and b.grid.kind == CARTESIAN:
        ra = resample_to_cartesian(a, b.grid)
        if not ra.mask.any():
            raise DataError("image extents are disjoint")
        return ra, b
    if a.grid.kind == CARTESIAN and b.grid.kind == POLAR:
        rb = resample_to_cartesian(b, a.grid)
        if not rb.mask.any():
            raise DataError("image extents are disjoint")
        return a, rb
    raise DataError("images are on incompatible grids")


def cmd_compare(args) -> int:
    a = SarImage.load(args.image_a)
    b = SarImage.load(args.image_b)
    a, b = _common_grid(a, b)
    diff = image_diff_db(a, b)
    report = {"diff_db": diff.summary(), "pixels": int(diff.db.size)}
    if args.config:
        cfg = _config(args)
        if cfg.regions:
            sa = region_snr(a, cfg.regions, cfg.noise_region)
            sb = region_snr(b, cfg.regions, cfg.noise_region)
            report["snr_a_db"] = sa
            report["snr_b_db"] = sb
            report["snr_delta_db"] = {k: sa[k] - sb[k] for k in sa}
    out = _out(args, "compare.json")
    grid = b.grid
    write_pgm(out.with_suffix(".pgm"), diff.db.reshape(grid.shape)[::-1], -DIFF_RANGE_DB, DIFF_RANGE_DB)
    out.write_text(json.dumps(report, indent=2) + "\n")
    s = diff.summary()
    print(f"median {s['median_db']:.3f} dB, p5 {s['p5_db']:.3f} dB, p95 {s['p95_db']:.3f} dB")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    spec = BeatSpectrum.load(args.data) if args.data else simulate(cfg)
    labels = args.labels.split(",") if args.labels else list(MATRIX_LABELS)
    matrix = [(label, c) for label, c in measure_matrix(cfg) if label in labels]
    if not matrix:
        raise ConfigError(f"no benchmark rows selected from {labels}")
    out = _out(args, "bench.csv")
    reports = []
    try:
        for label, c in matrix:
            rep = benchmark(c, spec, args.reps, label)
            reports.append(rep)
            print(f"{label:8s} load {rep.load_time.mean:.4f} s  bp {rep.bp_time.mean:.4f} s  "
                  f"bytes {rep.bytes_prepared}")
    except Exception:
        write_bench_csv(reports, out, partial=True)
        raise
    write_bench_csv(reports, out)
    write_bench_summary(reports, out.with_suffix(".json"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sarbp", description="FMCW SAR back-projection toolkit")
    ap.add_argument("--threads", type=int, default=0, help="kernel threads (0 = auto)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=False):
        p.add_argument("--config", help="pipeline JSON config (default: desk scene)")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="kernel threads (0 = auto)")
        if data:
            p.add_argument("--data", help="SARBP1 spectrum file")

    p = sub.add_parser("simulate", help="write a synthetic range-compressed spectrum")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="form an image from a spectrum")
    common(p, data=True)
    p.add_argument("--dynamic-range-db", type=float, default=60.0)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("compare", help="dB difference of two images")
    p.add_argument("image_a")
    p.add_argument("image_b", help="reference image")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="time the measure matrix")
    common(p, data=True)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--labels", help=f"comma-separated subset of {','.join(MATRIX_LABELS)}")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        set_threads(args.threads)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
