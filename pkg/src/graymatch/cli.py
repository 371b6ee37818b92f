"""Batch command-line interface.

Subcommands: build-ref, harmonize, inspect, metrics, synth, verify.
Exit codes: 0 success, 1 usage/config error, 2 data error. The env var
HARMONIZE_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from . import figures
from .errors import HarmonizationError
from .formats import ImageRecord, read_image, read_pgm, sidecar_path, write_pgm
from .harmonize import (
    REBIN_COMMON12,
    REBIN_NATIVE,
    HarmonizeOptions,
    _resolve_grid,
    harmonize,
)
from .histogram import fg_histogram, normalize_cdf, rebin
from .image import foreground_mask, largest_component, to_mono2
from .metrics import _kl_from_freq, cdf_freq, cdf_l1, gap_report
from .reference import build_reference, load_profile, save_profile
from .synthgen import VendorStyle, synth_image, vendor_transform

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_REPORT_FIELDS = (
    "image",
    "foreground_count",
    "dropped_zero_valued",
    "zeroed_outside_mask",
    "pre_distance",
    "post_distance",
    "rebin_applied",
)
_METRICS_FIELDS = ("image", "pre_l1", "post_l1", "kl_pre", "kl_post")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _read_manifest(path: str) -> list[str]:
    base = Path(path).parent
    entries = []
    with open(path, "r") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            entry = Path(line)
            if not entry.is_absolute():
                entry = base / entry
            entries.append(str(entry))
    return sorted(entries)


def _build_mask(image, min_intensity: int, keep_largest: bool):
    mask = foreground_mask(image, min_intensity)
    if keep_largest:
        mask = largest_component(mask)
    return mask


# ---------------------------------------------------------------------------
# build-ref
# ---------------------------------------------------------------------------

def cmd_build_ref(args) -> int:
    args.min_intensity = 1 if args.min_intensity is None else args.min_intensity
    if not os.path.isfile(args.manifest):
        print(f"build-ref: manifest not found: {args.manifest}", file=sys.stderr)
        return EXIT_USAGE
    paths = _read_manifest(args.manifest)
    if not paths:
        print(f"build-ref: manifest {args.manifest} lists no inputs", file=sys.stderr)
        return EXIT_USAGE

    pairs = []
    offenders = []
    for path in paths:
        try:
            record = read_image(path)
            image = to_mono2(record.image)
            mask = _build_mask(image, args.min_intensity, args.keep_largest_component)
            if mask.count == 0:
                raise HarmonizationError("no foreground pixels")
            pairs.append((image, mask))
        except (HarmonizationError, OSError) as exc:
            offenders.append((path, str(exc)))
    if offenders:
        for path, why in offenders:
            print(f"build-ref: {path}: {why}", file=sys.stderr)
        return EXIT_DATA

    try:
        profile = build_reference(
            pairs, method=args.method, target_bits=args.target_bits, label=args.label
        )
    except HarmonizationError as exc:
        print(f"build-ref: {exc}", file=sys.stderr)
        return EXIT_DATA
    save_profile(profile, args.out)
    print(
        f"wrote {args.out}: {profile.method} profile over {profile.image_count} image(s), "
        f"{profile.bit_depth}-bit grid"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# harmonize
# ---------------------------------------------------------------------------

def _merge_config(args) -> int | None:
    """Fill unset harmonize flags from the TOML config; flags win."""
    if not args.config:
        return None
    if not os.path.isfile(args.config):
        print(f"harmonize: config not found: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    with open(args.config, "rb") as fh:
        doc = tomllib.load(fh)
    if args.inputs == [] and "inputs" in doc:
        args.inputs = [str(p) for p in doc["inputs"]]
    for key in ("manifest", "profile", "out", "report"):
        if getattr(args, key) is None and key in doc:
            setattr(args, key, str(doc[key]))
    if args.workers is None and "workers" in doc:
        args.workers = int(doc["workers"])
    if args.min_intensity is None and "min_intensity" in doc:
        args.min_intensity = int(doc["min_intensity"])
    if args.rebin is None and "rebin" in doc:
        args.rebin = str(doc["rebin"])
    if not args.keep_largest_component and doc.get("keep_largest_component"):
        args.keep_largest_component = True
    if not args.no_figures and doc.get("figures") is False:
        args.no_figures = True
    return None


def _harmonize_one(path: str, profile, opts: HarmonizeOptions, out_dir: str):
    record = read_image(path)
    result, report = harmonize(record.image, profile, opts)
    out_path = os.path.join(out_dir, Path(path).stem + ".pgm")
    provenance = {
        "source": Path(path).name,
        "profile_label": profile.label,
        "profile_created": profile.created,
        "min_intensity": opts.min_intensity,
        "keep_largest_component": opts.keep_largest_component,
        "rebin_policy": opts.rebin_policy,
        **report.to_dict(),
    }
    write_pgm(
        ImageRecord(
            image=result,
            source_path=path,
            vendor=record.vendor,
            energy=record.energy,
            original_photometric=record.original_photometric,
        ),
        out_path,
        provenance=provenance,
    )
    return report


def cmd_harmonize(args) -> int:
    usage_exit = _merge_config(args)
    if usage_exit is not None:
        return usage_exit
    args.workers = 1 if args.workers is None else args.workers
    args.min_intensity = 1 if args.min_intensity is None else args.min_intensity
    args.rebin = REBIN_COMMON12 if args.rebin is None else args.rebin

    if args.workers < 1:
        print("harmonize: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.profile is None or args.out is None:
        print("harmonize: --profile and --out are required", file=sys.stderr)
        return EXIT_USAGE

    inputs = list(args.inputs)
    if args.manifest:
        if not os.path.isfile(args.manifest):
            print(f"harmonize: manifest not found: {args.manifest}", file=sys.stderr)
            return EXIT_USAGE
        inputs.extend(_read_manifest(args.manifest))
    inputs = sorted(dict.fromkeys(inputs))
    if not inputs:
        print("harmonize: no input images given", file=sys.stderr)
        return EXIT_USAGE
    if not os.path.isfile(args.profile):
        print(f"usage: provide an existing reference profile via --profile "
              f"(not found: {args.profile})", file=sys.stderr)
        return EXIT_USAGE

    out_dir = os.path.abspath(args.out)
    for path in inputs:
        if os.path.abspath(os.path.dirname(path)) == out_dir:
            print(f"harmonize: output directory must differ from input location: {path}",
                  file=sys.stderr)
            return EXIT_USAGE
    stems = [Path(p).stem for p in inputs]
    if len(set(stems)) != len(stems):
        print("harmonize: duplicate output names across inputs", file=sys.stderr)
        return EXIT_USAGE

    try:
        profile = load_profile(args.profile)
    except HarmonizationError as exc:
        print(f"harmonize: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        opts = HarmonizeOptions(
            min_intensity=args.min_intensity,
            keep_largest_component=args.keep_largest_component,
            rebin_policy=args.rebin,
        )
    except ValueError as exc:
        print(f"harmonize: {exc}", file=sys.stderr)
        return EXIT_USAGE
    os.makedirs(out_dir, exist_ok=True)

    def work(path: str):
        try:
            return path, _harmonize_one(path, profile, opts, out_dir), None
        except (HarmonizationError, OSError) as exc:
            return path, None, str(exc)

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(work, inputs))

    failures = [(p, err) for p, _, err in results if err is not None]
    for path, err in failures:
        print(f"harmonize: {path}: {err}", file=sys.stderr)

    rows = [
        {"image": path, **report.to_dict()}
        for path, report, err in results
        if err is None
    ]
    if args.report:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=_REPORT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        _atomic_write_text(args.report, buf.getvalue())
        if not args.no_figures and rows:
            figures.distances_figure(
                [Path(r["image"]).name for r in rows],
                [r["pre_distance"] for r in rows],
                [r["post_distance"] for r in rows],
                str(Path(args.report).with_suffix(".png")),
                ylabel="CDF L1 distance to reference",
                title="harmonization distance to reference",
            )
    done = len(rows)
    print(f"harmonized {done}/{len(inputs)} image(s) into {out_dir}")
    return EXIT_DATA if failures else EXIT_OK


# ---------------------------------------------------------------------------
# inspect
# ---------------------------------------------------------------------------

def cmd_inspect(args) -> int:
    args.min_intensity = 1 if args.min_intensity is None else args.min_intensity
    path = args.path
    if not os.path.isfile(path):
        print(f"inspect: file not found: {path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if path.lower().endswith(".json"):
            profile = load_profile(path)
            counts = [""] * profile.cdf.values.size
            cdf_values = profile.cdf.values
            hist = None
            cdf = profile.cdf
        else:
            record = read_image(path)
            image = to_mono2(record.image)
            mask = _build_mask(image, args.min_intensity, args.keep_largest_component)
            hist = fg_histogram(image, mask)
            cdf = normalize_cdf(hist)
            counts = [int(c) for c in hist.counts]
            cdf_values = cdf.values
    except HarmonizationError as exc:
        print(f"inspect: {exc}", file=sys.stderr)
        return EXIT_DATA

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin", "count", "cdf"])
    for k, (count, value) in enumerate(zip(counts, cdf_values)):
        writer.writerow([k, count, repr(float(value))])
    if args.out:
        _atomic_write_text(args.out, buf.getvalue())
        if not args.no_figures and hist is not None:
            figures.histogram_figure(
                hist, cdf, str(Path(args.out).with_suffix(".png")), title=Path(path).name
            )
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def cmd_metrics(args) -> int:
    args.min_intensity = 1 if args.min_intensity is None else args.min_intensity
    for d in (args.before_dir, args.after_dir):
        if not os.path.isdir(d):
            print(f"metrics: not a directory: {d}", file=sys.stderr)
            return EXIT_USAGE
    if not os.path.isfile(args.profile):
        print(f"metrics: profile not found: {args.profile}", file=sys.stderr)
        return EXIT_USAGE
    try:
        profile = load_profile(args.profile)
    except HarmonizationError as exc:
        print(f"metrics: {exc}", file=sys.stderr)
        return EXIT_DATA

    before_names = {p.name for p in Path(args.before_dir).glob("*.pgm")}
    after_names = {p.name for p in Path(args.after_dir).glob("*.pgm")}
    names = sorted(before_names & after_names)
    if not names:
        print("metrics: no common .pgm files between the two directories", file=sys.stderr)
        return EXIT_DATA

    rows = []
    cdfs_before: dict[str, tuple] = {}
    cdfs_after: dict[str, tuple] = {}
    try:
        for name in names:
            rec_before = read_pgm(os.path.join(args.before_dir, name))
            rec_after = read_pgm(os.path.join(args.after_dir, name))
            if rec_before.image.bit_depth != rec_after.image.bit_depth:
                print(f"metrics: {name}: bit depth differs between the two directories",
                      file=sys.stderr)
                return EXIT_DATA
            img_b = to_mono2(rec_before.image)
            img_a = to_mono2(rec_after.image)
            hist_b = fg_histogram(img_b, foreground_mask(img_b, args.min_intensity))
            hist_a = fg_histogram(img_a, foreground_mask(img_a, args.min_intensity))
            grid, src_b, ref_cdf, _ = _resolve_grid(hist_b, profile, REBIN_COMMON12)
            src_a = rebin(hist_a, grid) if grid < hist_a.bit_depth else hist_a
            if src_a.total == 0:
                print(f"metrics: {name}: no foreground left on the {grid}-bit grid",
                      file=sys.stderr)
                return EXIT_DATA
            cdf_b = normalize_cdf(src_b)
            cdf_a = normalize_cdf(src_a)
            ref_freq = cdf_freq(ref_cdf)
            rows.append({
                "image": name,
                "pre_l1": cdf_l1(cdf_b, ref_cdf),
                "post_l1": cdf_l1(cdf_a, ref_cdf),
                "kl_pre": _kl_from_freq(src_b.counts[1:] / src_b.total, ref_freq, args.epsilon),
                "kl_post": _kl_from_freq(src_a.counts[1:] / src_a.total, ref_freq, args.epsilon),
            })
            cdfs_before[name] = (rec_before.energy, cdf_b, ref_cdf)
            cdfs_after[name] = (rec_after.energy, cdf_a, ref_cdf)
    except (HarmonizationError, OSError) as exc:
        print(f"metrics: {exc}", file=sys.stderr)
        return EXIT_DATA

    summary = {
        "images": len(rows),
        "pre_l1_mean": float(np.mean([r["pre_l1"] for r in rows])),
        "pre_l1_max": float(max(r["pre_l1"] for r in rows)),
        "post_l1_mean": float(np.mean([r["post_l1"] for r in rows])),
        "post_l1_max": float(max(r["post_l1"] for r in rows)),
        "kl_pre_mean": float(np.mean([r["kl_pre"] for r in rows])),
        "kl_post_mean": float(np.mean([r["kl_post"] for r in rows])),
    }
    summary.update(_energy_gaps(cdfs_before, cdfs_after))

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_METRICS_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    if args.report:
        _atomic_write_text(args.report, buf.getvalue())
        _atomic_write_text(
            str(Path(args.report).with_suffix(".json")),
            json.dumps(summary, indent=1, sort_keys=True) + "\n",
        )
        if not args.no_figures:
            figures.metrics_figure(
                [r["image"] for r in rows],
                [r["pre_l1"] for r in rows],
                [r["post_l1"] for r in rows],
                [r["kl_pre"] for r in rows],
                [r["kl_post"] for r in rows],
                str(Path(args.report).with_suffix(".png")),
            )
        print(f"wrote {args.report}")
    else:
        sys.stdout.write(buf.getvalue())
        sys.stdout.write(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _energy_gaps(cdfs_before: dict, cdfs_after: dict) -> dict:
    """Cross-energy gap aggregates when sidecars label both low and high."""
    def split(cdfs):
        low = [cdf for energy, cdf, _ in cdfs.values() if energy == "low"]
        high = [cdf for energy, cdf, _ in cdfs.values() if energy == "high"]
        return low, high

    low_b, high_b = split(cdfs_before)
    if not low_b or not high_b:
        return {}
    ref_cdf = next(iter(cdfs_before.values()))[2]
    depths = {c.bit_depth for c in low_b + high_b} | {ref_cdf.bit_depth}
    if len(depths) != 1:
        return {}
    low_a, high_a = split(cdfs_after)
    return {
        "gap_before": gap_report(low_b, high_b, ref_cdf).to_dict(),
        "gap_after": gap_report(low_a, high_a, ref_cdf).to_dict(),
    }


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.count < 1:
        print("synth: --count must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    os.makedirs(args.out, exist_ok=True)
    style = None
    if args.gamma != 1.0 or args.gain != 1.0 or args.offset != 0:
        style = VendorStyle(gamma=args.gamma, gain=args.gain, offset=args.offset,
                            label=args.style_label)
    for i in range(args.count):
        image = synth_image(args.seed + i, args.width, args.height, args.bits)
        if style is not None:
            image = vendor_transform(image, style)
        name = f"{args.prefix}{i:04d}.pgm"
        write_pgm(
            ImageRecord(
                image=image,
                source_path=name,
                vendor=args.vendor,
                energy=args.energy,
            ),
            os.path.join(args.out, name),
        )
    print(f"wrote {args.count} phantom(s) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _verify_one(path: str) -> list[str]:
    problems = []
    if path.lower().endswith(".json"):
        load_profile(path)  # full invariant re-validation
        return problems
    record = read_pgm(path)
    image = record.image
    sc = sidecar_path(path)
    if not os.path.exists(sc):
        problems.append("missing sidecar")
        return problems
    with open(sc, "r") as fh:
        sidecar = json.load(fh)
    prov = sidecar.get("harmonization")
    if prov is not None:
        nonzero = int(np.count_nonzero(image.pixels))
        if nonzero != prov.get("foreground_count"):
            problems.append(
                f"foreground_count {prov.get('foreground_count')} does not match "
                f"{nonzero} nonzero pixels"
            )
        if image.photometric != "MONO2":
            problems.append("harmonized output must be MONO2")
    return problems


def cmd_verify(args) -> int:
    status = EXIT_OK
    for path in args.paths:
        if not os.path.isfile(path):
            print(f"verify: {path}: file not found", file=sys.stderr)
            status = EXIT_DATA
            continue
        try:
            problems = _verify_one(path)
        except (HarmonizationError, json.JSONDecodeError, OSError) as exc:
            print(f"verify: {path}: FAIL: {exc}", file=sys.stderr)
            status = EXIT_DATA
            continue
        if problems:
            for p in problems:
                print(f"verify: {path}: FAIL: {p}", file=sys.stderr)
            status = EXIT_DATA
        else:
            print(f"verify: {path}: OK")
    return status


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_mask_flags(p) -> None:
    p.add_argument("--min-intensity", type=int, default=None,
                   help="foreground threshold (default 1: every nonzero pixel)")
    p.add_argument("--keep-largest-component", action="store_true",
                   help="drop all but the largest connected foreground region")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graymatch",
                     description="Foreground-only CDF matching for grayscale images")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-ref", help="aggregate images into a reference profile")
    p.add_argument("manifest", help="text file listing one input image path per line")
    p.add_argument("--method", choices=["averaged", "pooled"], default="averaged")
    p.add_argument("--target-bits", type=int, default=None,
                   help="grid resolution of the profile (default: smallest input depth)")
    p.add_argument("--label", default="", help="free-text label stored in the profile")
    p.add_argument("--out", required=True, help="output profile path (.json)")
    _add_mask_flags(p)
    p.set_defaults(func=cmd_build_ref)

    p = sub.add_parser("harmonize", help="match images to a reference profile")
    p.add_argument("inputs", nargs="*", default=[], help="input images (.pgm/.dcm)")
    p.add_argument("--manifest", default=None, help="text file listing extra inputs")
    p.add_argument("--profile", default=None, help="reference profile (.json)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default 1)")
    p.add_argument("--rebin", choices=[REBIN_NATIVE, REBIN_COMMON12], default=None,
                   help="cross-depth policy (default common12)")
    p.add_argument("--report", default=None, help="write a CSV report (+figure) here")
    p.add_argument("--config", default=None, help="TOML config; explicit flags win")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    _add_mask_flags(p)
    p.set_defaults(func=cmd_harmonize)

    p = sub.add_parser("inspect", help="dump an image histogram/CDF or a profile as CSV")
    p.add_argument("path", help="image (.pgm/.dcm) or profile (.json)")
    p.add_argument("--out", default=None, help="CSV path (default stdout; figure alongside)")
    p.add_argument("--no-figures", action="store_true")
    _add_mask_flags(p)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("metrics", help="distribution distances before vs after harmonization")
    p.add_argument("before_dir")
    p.add_argument("after_dir")
    p.add_argument("--profile", required=True)
    p.add_argument("--report", default=None, help="CSV path; JSON summary and figure alongside")
    p.add_argument("--epsilon", type=float, default=1e-9, help="KL smoothing floor")
    p.add_argument("--no-figures", action="store_true")
    _add_mask_flags(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="write seeded phantom corpora as PGM")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--bits", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--style-label", default="", help="label for the style transform")
    p.add_argument("--vendor", default=None, help="vendor string for the sidecars")
    p.add_argument("--energy", choices=["low", "high"], default=None)
    p.add_argument("--prefix", default="phantom_")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="re-check profile or output invariants")
    p.add_argument("paths", nargs="+", help="profiles (.json) or outputs (.pgm)")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("HARMONIZE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HarmonizationError as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
