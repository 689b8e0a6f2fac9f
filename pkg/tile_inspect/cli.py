"""
tile-inspect command line.

    tile-inspect inspect --test tile.png --reference ref.png [--mode printed]
    tile-inspect classify --matrix label.txt
    tile-inspect synth --n 50 --mix 0.5 --seed 7 --out corpus/
    tile-inspect batch --manifest corpus/manifest.tsv --report out.csv
    tile-inspect report --input out.csv [--output out.json]

Exit status: 0 clean / success, 1 defective (inspect, classify), 2 error.
"""
import argparse
import json
import logging
import sys

import numpy as np

from . import classify, config, detect, harness, label, raster, synth
from .errors import ParamError, TileInspectError

logger = logging.getLogger("tile_inspect")

EXIT_CLEAN = 0
EXIT_DEFECTIVE = 1
EXIT_ERROR = 2


def _csv_list(text):
    return [item.strip() for item in text.split(",") if item.strip()]


def _format_report_text(report):
    det = report.detection
    lines = [f"n1: {det.n1}", f"n2: {det.n2}"]
    if not det.defective:
        lines.append("no defect")
        return "\n".join(lines)
    lines.append("defective")
    counts = {
        "pinhole": f"p_count {report.pinhole.p_count}",
        "crack": f"c_count {report.crack.c_count}",
        "edge": f"e_count {report.edge.e_count}",
        "corner": "corners " + (
            ",".join(sorted(c.value for c in report.corner.corner_ids)) or "-"
        ),
    }
    for name, hit in report.found().items():
        verdict = "Found" if hit else "Not Found"
        extra = f" ({counts[name]})" if name in counts else ""
        lines.append(f"{name}: {verdict}{extra}")
    return "\n".join(lines)


def _emit(report, fmt):
    if fmt == "json":
        print(json.dumps(report.as_dict(), indent=2))
    else:
        print(_format_report_text(report))


def cmd_inspect(args):
    cfg = config.resolve_config(args)
    test_img = raster.load_image(args.test)
    ref_img = raster.load_image(args.reference)
    if args.trim:
        width, height = args.trim
        test_img = raster.trim(test_img, width, height)
        ref_img = raster.trim(ref_img, width, height)
    report, label_matrix = harness.inspect_images(
        test_img, ref_img, cfg, label.TileMode(args.mode)
    )
    if args.emit_matrix:
        label.save_matrix(label_matrix, args.emit_matrix)
    _emit(report, args.format)
    return EXIT_DEFECTIVE if report.detection.defective else EXIT_CLEAN


def cmd_classify(args):
    cfg = config.resolve_config(args)
    label_matrix = label.load_matrix(args.matrix)
    cfg.validate_shape(*label_matrix.shape)
    # a stored matrix has no reference to count against; classify it as is
    marked = int(np.count_nonzero(label_matrix))
    detection = detect.DetectionResult(n1=marked, n2=0, defective=True)
    report = classify.classify_all(label_matrix, detection, cfg)
    _emit(report, args.format)
    return EXIT_DEFECTIVE if report.found_kinds() else EXIT_CLEAN


def cmd_synth(args):
    cfg = config.resolve_config(args)
    try:
        kinds = [synth.DefectKind(k) for k in _csv_list(args.kinds)]
        modes = [label.TileMode(m) for m in _csv_list(args.modes)]
    except ValueError as e:
        raise ParamError(str(e)) from e
    manifest = synth.generate_corpus(
        n=args.n,
        mix=args.mix,
        seed=args.seed,
        out_dir=args.out,
        size=args.size,
        kinds=kinds,
        modes=modes,
        noise=args.noise,
        cfg=cfg,
        verbosity=args.verbosity,
    )
    print(manifest)
    return EXIT_CLEAN


def cmd_batch(args):
    cfg = config.resolve_config(args)
    report = harness.run_batch(
        args.manifest,
        cfg,
        jobs=args.jobs,
        verbosity=args.verbosity,
        log_to_disk=args.log_to_disk,
        name=args.name,
    )
    if args.timing:
        try:
            counts = [int(k) for k in _csv_list(args.timing)]
        except ValueError as e:
            raise ParamError(f"--timing expects comma separated counts: {e}") from e
        report.timing = harness.timing_table(
            args.manifest,
            cfg,
            counts=counts,
            jobs=args.jobs,
            repeats=args.timing_repeats,
            verbosity=args.verbosity,
        )
    if args.report:
        fmt = args.format or harness.report_format(args.report)
        harness.write_report(report, args.report, fmt)
    print(harness.format_summary(report))
    return EXIT_CLEAN


def cmd_report(args):
    report = harness.read_report(args.input)
    if args.output:
        harness.write_report(report, args.output, harness.report_format(args.output))
    print(harness.format_summary(report))
    return EXIT_CLEAN


def make_parser():
    parser = argparse.ArgumentParser(
        prog="tile-inspect",
        description="Ceramic tile surface defect detection and classification",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    inspect = subparsers.add_parser("inspect", help="inspect one tile against a reference")
    inspect.add_argument("--test", type=str, required=True, help="tile image (PNG/BMP)")
    inspect.add_argument(
        "--reference", type=str, required=True, help="known-good tile image"
    )
    inspect.add_argument(
        "--mode",
        type=str,
        choices=[m.value for m in label.TileMode],
        default=label.TileMode.PLANE.value,
        help="plane tiles are labeled alone, printed tiles minus the reference pattern",
    )
    inspect.add_argument(
        "--emit-matrix", type=str, default=None, help="write the label matrix here"
    )
    inspect.add_argument(
        "--trim",
        type=int,
        nargs=2,
        metavar=("W", "H"),
        default=None,
        help="center-crop both images to W x H first",
    )
    inspect.add_argument("--format", type=str, choices=["text", "json"], default="text")
    config.add_args(inspect)
    inspect.set_defaults(func=cmd_inspect)

    classify_cmd = subparsers.add_parser(
        "classify", help="run the six classifiers on a saved label matrix"
    )
    classify_cmd.add_argument("--matrix", type=str, required=True)
    classify_cmd.add_argument(
        "--format", type=str, choices=["text", "json"], default="text"
    )
    config.add_args(classify_cmd)
    classify_cmd.set_defaults(func=cmd_classify)

    synth_cmd = subparsers.add_parser("synth", help="generate a synthetic tile corpus")
    synth_cmd.add_argument("--n", type=int, required=True, help="number of tiles")
    synth_cmd.add_argument(
        "--mix", type=float, required=True, help="fraction of defective tiles"
    )
    synth_cmd.add_argument("--seed", type=int, required=True)
    synth_cmd.add_argument("--out", type=str, required=True, help="output directory")
    synth_cmd.add_argument("--size", type=int, default=256, help="tile side (pixels)")
    synth_cmd.add_argument(
        "--kinds",
        type=str,
        default=",".join(k.value for k in synth.ALL_KINDS),
        help="comma separated defect kinds, cycled over defective tiles",
    )
    synth_cmd.add_argument(
        "--modes",
        type=str,
        default="plane,printed",
        help="comma separated tile modes, cycled by tile index",
    )
    synth_cmd.add_argument(
        "--noise", type=int, default=2, help="impulse noise amplitude (0-3)"
    )
    synth_cmd.add_argument(
        "--verbosity", type=int, default=0, help="verbosity > 0 displays a progress bar"
    )
    config.add_args(synth_cmd)
    synth_cmd.set_defaults(func=cmd_synth)

    batch = subparsers.add_parser("batch", help="evaluate a corpus manifest")
    batch.add_argument("--manifest", type=str, required=True)
    batch.add_argument("--report", type=str, default=None, help="report output path")
    batch.add_argument(
        "--format",
        type=str,
        choices=["csv", "json"],
        default=None,
        help="report format (default: from the file extension)",
    )
    batch.add_argument("--jobs", type=int, default=1, help="worker processes")
    batch.add_argument(
        "--timing_repeats",
        type=int,
        default=1,
        help="best-of-N runs per timing count",
    )
    batch.add_argument(
        "--timing",
        type=str,
        nargs="?",
        const=",".join(str(k) for k in harness.TIMING_COUNTS),
        default=None,
        help="time the first k tiles for each comma separated k "
        "(bare --timing: 10,20,30,40,50)",
    )
    batch.add_argument(
        "--verbosity", type=int, default=0, help="verbosity > 0 displays a progress bar"
    )
    batch.add_argument(
        "--log_to_disk",
        action="store_true",
        help="write tensorboard logs to a numbered run directory under ti_runs/",
    )
    batch.add_argument("--name", type=str, default="ti_batch", help="run name")
    config.add_args(batch)
    batch.set_defaults(func=cmd_batch)

    report = subparsers.add_parser("report", help="summarize or convert a saved report")
    report.add_argument("--input", type=str, required=True)
    report.add_argument(
        "--output", type=str, default=None, help="re-serialize (.csv or .json)"
    )
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    level = logging.INFO if getattr(args, "verbosity", 0) else logging.WARNING
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except (TileInspectError, OSError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
