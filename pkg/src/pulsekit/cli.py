"""Command-line surface: estimate, grid, synth, emit, fitmef, eval.

Every command takes the global --seed/--threads/--tissue-table flags and is
deterministic for a fixed seed: identical flags produce byte-identical
output files regardless of thread count.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import augment, estimate, grid, metrics, relaxometry
from .batchfile import DEFAULT_LABEL_COUNT
from .errors import PulsekitError, UsageError
from .sequences import (
    SequenceKind,
    ThetaSet,
    read_theta_file,
    write_theta_file,
)
from .volume import BrainMask, Intent, NMRMaps, Volume, read_nifti, write_nifti


def _read_mask(path: str) -> BrainMask:
    vol = read_nifti(path, intent=Intent.LABEL)
    return BrainMask(vol.data > 0)


def _read_map(path: str, intent: Intent) -> Volume:
    vol = read_nifti(path)
    return Volume(vol.data.astype(np.float64), vol.spacing, intent, vol.orientation)


def _load_tables(paths: list[str] | None) -> dict[float, estimate.TissueTable]:
    if paths:
        tables = [estimate.read_tissue_table(p) for p in paths]
    else:
        tables = [estimate.packaged_table(1.5), estimate.packaged_table(3.0)]
    by_field: dict[float, estimate.TissueTable] = {}
    for table in tables:
        if table.field_tesla in by_field:
            raise UsageError(f"duplicate tissue table for {table.field_tesla} T")
        by_field[table.field_tesla] = table
    return by_field


def _pick_table(tables: dict[float, estimate.TissueTable],
                field: float | None) -> estimate.TissueTable:
    if field is None:
        if len(tables) == 1:
            return next(iter(tables.values()))
        raise UsageError(
            f"--field required; tables loaded for {sorted(tables)} T")
    for f, table in tables.items():
        if math.isclose(f, field):
            return table
    raise UsageError(f"no tissue table loaded for {field} T (have {sorted(tables)})")


def cmd_estimate(args) -> int:
    kind = SequenceKind.parse(args.kind)
    volume = read_nifti(args.volume)
    mask = _read_mask(args.mask)
    tables = _load_tables(args.tissue_table)
    table = _pick_table(tables, args.field)
    means, fit = estimate.class_means_from_volume(volume, mask, kind)
    theta = estimate.estimate_theta(means, table, kind)
    lines = []
    if args.report_fit:
        lines += ["# " + line for line in fit.to_lines().splitlines()]
    lines += [f"# field {table.field_tesla!r}", theta.to_line()]
    if args.map_to is not None:
        target = _pick_table(tables, args.map_to)
        xf = estimate.build_field_transform(target, table, kind)
        mapped = estimate.map_theta(theta, xf)
        lines += [f"# field {target.field_tesla!r} (mapped)", mapped.to_line()]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def cmd_grid(args) -> int:
    thetas = []
    for path in args.thetas:
        thetas.extend(read_theta_file(path))
    built = grid.build_grid(thetas, bins=args.bins, literal_bounds=args.literal_bounds)
    grid.write_grid_file(built, args.out)
    return 0


def cmd_synth(args) -> int:
    if args.theta_file:
        theta = read_theta_file(args.theta_file)[0]
    elif args.kind and args.theta is not None:
        theta = ThetaSet(SequenceKind.parse(args.kind), *args.theta)
    else:
        raise UsageError("provide --theta-file or --kind with --theta T0 T1 T2")
    nmr = NMRMaps(
        rho=_read_map(args.rho, Intent.NMR_RHO),
        t1=_read_map(args.t1, Intent.NMR_T1),
        t2=_read_map(args.t2, Intent.NMR_T2),
    )
    mask = _read_mask(args.mask)
    out = relaxometry.synthesize_gamma_a(nmr, theta, mask)
    write_nifti(out, args.out)
    return 0


def _parse_subject(spec: str, index: int) -> augment.Subject:
    parts = spec.split(",")
    if len(parts) not in (6, 7):
        raise UsageError(
            "--subject needs VOLUME,LABELS,RHO,T1,T2,MASK[,ID] paths, "
            f"got {len(parts)} fields")
    subject_id = parts[6] if len(parts) == 7 else f"subject{index}"
    return augment.Subject(
        subject_id=subject_id,
        volume=read_nifti(parts[0]),
        labels=read_nifti(parts[1], intent=Intent.LABEL),
        nmr=NMRMaps(
            rho=_read_map(parts[2], Intent.NMR_RHO),
            t1=_read_map(parts[3], Intent.NMR_T1),
            t2=_read_map(parts[4], Intent.NMR_T2),
        ),
        mask=_read_mask(parts[5]),
    )


def _parse_patch_size(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3 or any(p <= 0 for p in parts):
        raise UsageError(f"--patch-size needs N or A,B,C positive ints, got {text!r}")
    return tuple(parts)


def cmd_emit(args) -> int:
    subjects = [_parse_subject(s, i) for i, s in enumerate(args.subject)]
    grids = {}
    for item in args.grid:
        if "=" not in item:
            raise UsageError(f"--grid needs KIND=PATH, got {item!r}")
        kind_name, path = item.split("=", 1)
        grids[SequenceKind.parse(kind_name)] = grid.read_grid_file(path)
    augment.emit_batches(
        subjects, grids, args.count, args.out, args.seed,
        patch_size=_parse_patch_size(args.patch_size),
        label_count=args.label_count,
        threads=args.threads,
        min_mask_fraction=args.min_mask_fraction,
    )
    return 0


def cmd_fitmef(args) -> int:
    if len(args.image) != len(args.flip_deg):
        raise UsageError("need one --flip-deg per --image")
    mef = relaxometry.MefAcquisition(
        images=tuple(read_nifti(p) for p in args.image),
        flip_angles=tuple(math.radians(a) for a in args.flip_deg),
        tr=args.tr,
        te=args.te,
    )
    mask = _read_mask(args.mask)
    fit = relaxometry.fit_rho_t1(mef, mask)
    write_nifti(fit.g_rho, args.out_rho)
    write_nifti(fit.t1, args.out_t1)
    if args.out_valid:
        write_nifti(Volume(fit.valid.data.astype(np.int32), fit.t1.spacing,
                           Intent.LABEL, fit.t1.orientation), args.out_valid)
    return 0


def cmd_eval(args) -> int:
    segs = [read_nifti(p, intent=Intent.LABEL) for p in args.seg]
    if len(segs) < 2:
        raise UsageError("eval needs at least two segmentations")
    structures = metrics.StructureSet()
    names = args.names.split(",") if args.names else [f"acq{i}" for i in range(len(segs))]
    if len(names) != len(segs):
        raise UsageError("--names must list one name per --seg")
    per_seg = [metrics.structure_volumes(seg, structures) for seg in segs]
    rows = {acr: [vols[acr] for vols in per_seg]
            for acr in structures.mapping.values()}
    metrics.write_consistency_report(args.out, names, rows)
    if args.dice:
        if len(segs) != 2:
            raise UsageError("--dice needs exactly two segmentations")
        table = {acr: metrics.dice(segs[0], segs[1], label_id)
                 for label_id, acr in structures.items()}
        sys.stdout.write(metrics.format_dice_report(table))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsekit",
        description="Approximate pulse-sequence models: estimate parameters, "
                    "build grids, synthesize contrasts, emit training batches, "
                    "fit relaxometry, and evaluate consistency.")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for every random draw (default 0)")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads; results do not depend on it")
    parser.add_argument("--tissue-table", action="append", metavar="PATH",
                        help="tissue NMR table file (repeatable; default: packaged "
                             "1.5 T and 3 T tables)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate the three-parameter set of a volume")
    p.add_argument("--volume", required=True, help="intensity NIfTI")
    p.add_argument("--mask", required=True, help="brain mask NIfTI")
    p.add_argument("--kind", required=True, help="flash|spgr|mprage|t2space")
    p.add_argument("--field", type=float, help="field strength of the acquisition (T)")
    p.add_argument("--map-to", type=float, metavar="TESLA",
                   help="also print the parameters mapped to this field strength")
    p.add_argument("--report-fit", action="store_true",
                   help="include the fitted mixture components as comments")
    p.add_argument("--out", help="write the printed theta records to a file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("grid", help="build a parameter grid from theta files")
    p.add_argument("--thetas", nargs="+", required=True, help="theta record files")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--literal-bounds", action="store_true",
                   help="use the raw [0.8*min, 1.2*max] rule (positive corpora only)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("synth", help="synthesize a contrast volume from NMR maps")
    p.add_argument("--rho", required=True)
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--theta-file", help="first record of this theta file")
    p.add_argument("--kind", help="sequence kind when giving --theta directly")
    p.add_argument("--theta", type=float, nargs=3, metavar=("T0", "T1", "T2"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("emit", help="emit a PSAB training batch file")
    p.add_argument("--subject", action="append", required=True,
                   metavar="VOL,LABELS,RHO,T1,T2,MASK[,ID]")
    p.add_argument("--grid", action="append", required=True, metavar="KIND=PATH")
    p.add_argument("--count", type=int, required=True,
                   help="total records (multiple of 4)")
    p.add_argument("--patch-size", default="96", metavar="N|A,B,C")
    p.add_argument("--label-count", type=int, default=DEFAULT_LABEL_COUNT)
    p.add_argument("--min-mask-fraction", type=float, default=0.0,
                   help="resample corners until the patch has this in-mask fraction")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("fitmef", help="fit rho/T1 from multi-flip-angle images")
    p.add_argument("--image", action="append", required=True)
    p.add_argument("--flip-deg", action="append", type=float, required=True)
    p.add_argument("--tr", type=float, required=True, help="TR in ms")
    p.add_argument("--te", type=float, default=0.0, help="TE in ms")
    p.add_argument("--mask", required=True)
    p.add_argument("--out-rho", required=True)
    p.add_argument("--out-t1", required=True)
    p.add_argument("--out-valid", help="write the validity mask here")
    p.set_defaults(func=cmd_fitmef)

    p = sub.add_parser("eval", help="consistency metrics across segmentations")
    p.add_argument("--seg", action="append", required=True, help="label NIfTI (repeat)")
    p.add_argument("--names", help="comma-separated acquisition names")
    p.add_argument("--dice", action="store_true",
                   help="also print per-structure Dice (exactly two --seg)")
    p.add_argument("--out", required=True, help="tab-separated report path")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"FileNotFoundError: no such file: {exc.filename}", file=sys.stderr)
        return 1
    except PulsekitError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
