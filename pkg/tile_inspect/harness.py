"""
Batch evaluation: run the inspection pipeline over a corpus manifest, score
it against ground truth and time it.

Metrics
    detection_efficiency  tiles whose defective/clean verdict matches ground
                          truth / n_tiles. A tile that fails to process is
                          counted as incorrect.
    per_class_rate[k]     tiles whose found flag for class k matches ground
                          truth (k present or absent) / n_tiles.
    per_class_recall[k]   tiles containing k on which k was found / tiles
                          containing k (None when no tile contains k).
"""
import concurrent.futures
import dataclasses
import io
import itertools
import json
import logging
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import tensorboardX
import tqdm

from . import classify, config, detect, label, preprocess, raster, synth, utils
from .config import ClassifierConfig
from .errors import ManifestError, ParamError, TileInspectError

logger = logging.getLogger(__name__)

REPORT_COLUMNS = (
    "tile_id",
    "mode",
    "gt_defective",
    "det_defective",
    "n1",
    "n2",
    "gt_kinds",
) + classify.DEFECT_CLASSES + ("seconds",)

METRIC_NOTE = (
    "rate = correct found/not-found decisions per class / n_tiles; "
    "recall = tiles where the class was found / tiles containing it"
)

# tile counts of the throughput sweep
TIMING_COUNTS = (10, 20, 30, 40, 50)


@dataclasses.dataclass
class TileResult:
    tile_id: str
    mode: str
    gt_defective: bool
    gt_kinds: Tuple[str, ...]
    det_defective: Optional[bool] = None
    n1: Optional[int] = None
    n2: Optional[int] = None
    found: Dict[str, bool] = dataclasses.field(
        default_factory=lambda: {k: False for k in classify.DEFECT_CLASSES}
    )
    seconds: float = 0.0
    error: Optional[str] = None

    @property
    def failed(self):
        return self.det_defective is None

    @property
    def correct(self):
        return not self.failed and self.det_defective == self.gt_defective

    def class_correct(self, kind):
        return not self.failed and self.found[kind] == (kind in self.gt_kinds)

    def as_row(self):
        row = {
            "tile_id": self.tile_id,
            "mode": self.mode,
            "gt_defective": int(self.gt_defective),
            "det_defective": None if self.failed else int(self.det_defective),
            "n1": self.n1,
            "n2": self.n2,
            "gt_kinds": ";".join(self.gt_kinds) if self.gt_kinds else "-",
        }
        for kind in classify.DEFECT_CLASSES:
            row[kind] = int(self.found[kind])
        row["seconds"] = float(self.seconds)
        return row

    @classmethod
    def from_row(cls, row):
        def optional_int(val):
            if val is None or val == "" or (isinstance(val, float) and np.isnan(val)):
                return None
            return int(val)

        det = optional_int(row["det_defective"])
        kinds = str(row["gt_kinds"])
        return cls(
            tile_id=str(row["tile_id"]),
            mode=str(row["mode"]),
            gt_defective=bool(int(row["gt_defective"])),
            gt_kinds=() if kinds in ("-", "") else tuple(kinds.split(";")),
            det_defective=None if det is None else bool(det),
            n1=optional_int(row["n1"]),
            n2=optional_int(row["n2"]),
            found={k: bool(int(row[k])) for k in classify.DEFECT_CLASSES},
            seconds=float(row["seconds"]),
        )


@dataclasses.dataclass(frozen=True)
class TimingPoint:
    seconds: float
    detection_efficiency: float


@dataclasses.dataclass
class BatchReport:
    tiles: List[TileResult]
    total_time: float
    config_echo: dict
    timing: Dict[int, TimingPoint] = dataclasses.field(default_factory=dict)

    @property
    def n_tiles(self):
        return len(self.tiles)

    @property
    def timing_average_efficiency(self):
        if not self.timing:
            return None
        return utils.mean([p.detection_efficiency for p in self.timing.values()])

    @property
    def per_tile_times(self):
        return [t.seconds for t in self.tiles]

    @property
    def detection_efficiency(self):
        if not self.tiles:
            return 0.0
        return sum(t.correct for t in self.tiles) / len(self.tiles)

    @property
    def per_class_rate(self):
        if not self.tiles:
            return {k: 0.0 for k in classify.DEFECT_CLASSES}
        return {
            k: sum(t.class_correct(k) for t in self.tiles) / len(self.tiles)
            for k in classify.DEFECT_CLASSES
        }

    @property
    def per_class_recall(self):
        recall = {}
        for kind in classify.DEFECT_CLASSES:
            holders = [t for t in self.tiles if kind in t.gt_kinds]
            if holders:
                recall[kind] = sum(t.found[kind] for t in holders) / len(holders)
            else:
                recall[kind] = None
        return recall

    def confusion(self):
        counts = {"tp": 0, "tn": 0, "fp": 0, "fn": 0, "failed": 0}
        for t in self.tiles:
            if t.failed:
                counts["failed"] += 1
            elif t.det_defective:
                counts["tp" if t.gt_defective else "fp"] += 1
            else:
                counts["fn" if t.gt_defective else "tn"] += 1
        return counts

    def summary(self):
        return {
            "n_tiles": self.n_tiles,
            "detection_efficiency": self.detection_efficiency,
            "metric": METRIC_NOTE,
            "per_class_rate": self.per_class_rate,
            "per_class_recall": self.per_class_recall,
            "total_time": self.total_time,
            "timing": {
                str(k): dataclasses.asdict(point) for k, point in self.timing.items()
            },
            "timing_average_efficiency": self.timing_average_efficiency,
        }


def inspect_images(test_img, ref_img, cfg, mode=label.TileMode.PLANE):
    """
    Full single-tile pipeline. Returns (DefectReport, LabelMatrix); the label
    matrix is built for every tile, the classifiers only run on defective
    ones.
    """
    test_bin = preprocess.preprocess_pipeline(test_img, cfg)
    ref_bin = preprocess.preprocess_pipeline(ref_img, cfg)
    detection = detect.detect_defect(test_bin, ref_bin, margin=cfg.detect_margin)
    cfg.validate_shape(*test_bin.shape)
    label_matrix = label.build_label_matrix(
        test_bin, mode, ref_bin=ref_bin, ref_dilate=cfg.ref_dilate
    )
    return classify.classify_all(label_matrix, detection, cfg), label_matrix


def _run_tile(entry, cfg):
    result = TileResult(
        tile_id=entry.tile_id,
        mode=entry.mode.value,
        gt_defective=entry.defective,
        gt_kinds=tuple(entry.kinds),
    )
    with utils.stopwatch() as elapsed:
        try:
            test_img = raster.load_image(entry.image_path)
            ref_img = raster.load_image(entry.reference_path)
            report, _ = inspect_images(test_img, ref_img, cfg, entry.mode)
        except (TileInspectError, OSError) as e:
            report = None
            result.error = f"{type(e).__name__}: {e}"
    result.seconds = elapsed()
    if report is not None:
        result.det_defective = report.detection.defective
        result.n1 = report.detection.n1
        result.n2 = report.detection.n2
        result.found = report.found()
    return result


def _entries(manifest):
    if isinstance(manifest, (str, os.PathLike)):
        return synth.read_manifest(manifest)
    return list(manifest)


def run_batch(
    manifest,
    cfg=None,
    jobs=1,
    verbosity=0,
    log_to_disk=False,
    name="ti_batch",
    base_path="ti_runs",
):
    """
    Inspect every tile of `manifest` (a manifest.tsv path or a list of
    ManifestEntry) and score the verdicts. Tiles may be spread over `jobs`
    worker processes; results always come back in manifest order.
    """
    cfg = (cfg or ClassifierConfig()).validate()
    if jobs < 1:
        raise ParamError(f"jobs must be a positive worker count, got {jobs}")
    entries = _entries(manifest)

    if verbosity:
        logger.info("inspecting %d tiles with %d worker(s)", len(entries), jobs)
    if log_to_disk:
        save_dir = utils.make_process_dirs(name, base_path=base_path)
        writer = tensorboardX.SummaryWriter(save_dir)

    with utils.stopwatch() as elapsed:
        if jobs == 1:
            results = map(_run_tile, entries, itertools.repeat(cfg))
            if verbosity:
                results = tqdm.tqdm(results, total=len(entries))
            tiles = list(results)
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(_run_tile, entries, itertools.repeat(cfg))
                if verbosity:
                    results = tqdm.tqdm(results, total=len(entries))
                tiles = list(results)
    report = BatchReport(
        tiles=tiles, total_time=elapsed(), config_echo=cfg.as_dict()
    )

    for step, tile in enumerate(tiles):
        if tile.failed:
            logger.warning("tile %s failed: %s", tile.tile_id, tile.error)
            continue
        for kind in tile.gt_kinds:
            if not tile.found[kind]:
                logger.info("tile %s: injected %s not found", tile.tile_id, kind)
        if log_to_disk:
            writer.add_scalar("seconds", tile.seconds, step)
            writer.add_scalar("n1", tile.n1, step)
            writer.add_scalar("n2", tile.n2, step)

    if log_to_disk:
        writer.add_scalar("detection_efficiency", report.detection_efficiency, 0)
        for kind, rate in report.per_class_rate.items():
            writer.add_scalar(f"rate/{kind}", rate, 0)
        writer.add_hparams(
            utils.clean_hparams_dict(report.config_echo),
            {"hparam/detection_efficiency": report.detection_efficiency},
        )
        writer.close()
    return report


def timing_table(manifest, cfg=None, counts=TIMING_COUNTS, jobs=1, repeats=1, verbosity=0):
    """
    Batch time and detection efficiency over the first k manifest tiles for
    every k in `counts`. The time is the best of `repeats` runs.
    """
    entries = _entries(manifest)
    if repeats < 1:
        raise ParamError(f"repeats must be at least 1, got {repeats}")
    table = {}
    for k in counts:
        if not 1 <= k <= len(entries):
            raise ParamError(f"cannot time {k} tiles from a manifest of {len(entries)}")
        runs = [
            run_batch(entries[:k], cfg, jobs=jobs, verbosity=verbosity)
            for _ in range(repeats)
        ]
        table[k] = TimingPoint(
            seconds=min(r.total_time for r in runs),
            detection_efficiency=runs[0].detection_efficiency,
        )
        logger.info(
            "%d tiles: %.3f s, detection efficiency %.4f",
            k,
            table[k].seconds,
            table[k].detection_efficiency,
        )
    return table


def recompute_efficiency(rows):
    """
    Detection efficiency from per-tile report rows (dicts or a DataFrame).
    """
    if isinstance(rows, pd.DataFrame):
        rows = rows.to_dict("records")
    tiles = [TileResult.from_row(row) for row in rows]
    if not tiles:
        return 0.0
    return sum(t.correct for t in tiles) / len(tiles)


def _frame(report):
    frame = pd.DataFrame(
        [t.as_row() for t in report.tiles], columns=list(REPORT_COLUMNS)
    )
    return frame.astype({"det_defective": "Int64", "n1": "Int64", "n2": "Int64"})


def _summary_lines(report):
    lines = [
        f"n_tiles: {report.n_tiles}",
        f"detection_efficiency: {config.format_value(report.detection_efficiency)}",
        f"metric: {METRIC_NOTE}",
    ]
    for kind, rate in report.per_class_rate.items():
        lines.append(f"rate.{kind}: {config.format_value(rate)}")
    for kind, recall in report.per_class_recall.items():
        lines.append(f"recall.{kind}: {config.format_value(recall)}")
    lines.append(f"total_time: {config.format_value(float(report.total_time))}")
    for k, point in report.timing.items():
        lines.append(f"timing.{k}: {config.format_value(float(point.seconds))}")
        lines.append(
            f"timing_efficiency.{k}: "
            f"{config.format_value(float(point.detection_efficiency))}"
        )
    if report.timing:
        lines.append(
            "timing_average_efficiency: "
            f"{config.format_value(float(report.timing_average_efficiency))}"
        )
    for key, val in report.config_echo.items():
        lines.append(f"config.{key}: {config.format_value(val)}")
    return lines


def write_report(report, path, fmt="csv"):
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for line in _summary_lines(report):
                f.write(f"# {line}\n")
            _frame(report).to_csv(f, index=False, lineterminator="\n")
    elif fmt == "json":
        rows = [t.as_row() for t in report.tiles]
        doc = {"summary": report.summary(), "config": report.config_echo, "tiles": rows}
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")
    else:
        raise ParamError(f"unknown report format {fmt!r}, expected csv or json")


def _parse_config_echo(items, source):
    text = "\n".join(f"{key} = {val}" for key, val in items.items())
    try:
        return config.parse_config_text(text, source=source)
    except TileInspectError as e:
        raise ManifestError(f"{source}: bad config echo: {e}") from e


def _read_csv_report(path):
    summary = {}
    body = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.startswith("#"):
                key, sep, val = line[1:].strip().partition(": ")
                if not sep:
                    raise ManifestError(f"{path}: bad summary line {line.rstrip()!r}")
                summary[key] = val
            else:
                body.append(line)
    if not body:
        raise ManifestError(f"{path}: missing column header")
    frame = pd.read_csv(io.StringIO("".join(body)), dtype=str, keep_default_na=False)
    if tuple(frame.columns) != REPORT_COLUMNS:
        raise ManifestError(f"{path}: unexpected columns {list(frame.columns)}")
    try:
        tiles = [TileResult.from_row(row) for row in frame.to_dict("records")]
        total_time = float(summary.get("total_time", "0"))
        timing = {}
        for key, val in summary.items():
            if key.startswith("timing."):
                k = key.split(".", 1)[1]
                timing[int(k)] = TimingPoint(
                    float(val), float(summary[f"timing_efficiency.{k}"])
                )
    except (KeyError, ValueError) as e:
        raise ManifestError(f"{path}: {e}") from e
    echo = {
        key.split(".", 1)[1]: val
        for key, val in summary.items()
        if key.startswith("config.")
    }
    return BatchReport(
        tiles=tiles,
        total_time=total_time,
        config_echo=_parse_config_echo(echo, str(path)),
        timing=timing,
    )


def _read_json_report(path):
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ManifestError(f"{path}: {e}") from e
    try:
        summary = doc["summary"]
        tiles = [TileResult.from_row(row) for row in doc["tiles"]]
        timing = {
            int(k): TimingPoint(float(v["seconds"]), float(v["detection_efficiency"]))
            for k, v in summary.get("timing", {}).items()
        }
        total_time = float(summary["total_time"])
        echo = doc["config"]
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"{path}: malformed report: {e}") from e
    return BatchReport(
        tiles=tiles, total_time=total_time, config_echo=echo, timing=timing
    )


def read_report(path):
    """
    Parse a report written by `write_report`; the format follows the file
    extension (.json, anything else is read as CSV).
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if str(path).lower().endswith(".json"):
        return _read_json_report(path)
    return _read_csv_report(path)


def report_format(path):
    return "json" if str(path).lower().endswith(".json") else "csv"


def format_summary(report):
    counts = report.confusion()
    lines = [
        f"tiles: {report.n_tiles}",
        "detection efficiency: {:.4f} (tp {tp}, tn {tn}, fp {fp}, fn {fn}, failed {failed})".format(
            report.detection_efficiency, **counts
        ),
        "",
    ]
    recall = report.per_class_recall
    table = pd.DataFrame(
        {
            "rate": [f"{r:.4f}" for r in report.per_class_rate.values()],
            "recall": ["-" if recall[k] is None else f"{recall[k]:.4f}" for k in recall],
        },
        index=list(classify.DEFECT_CLASSES),
    )
    lines.append(table.to_string())
    lines.append("")
    if report.tiles:
        q1, median, q3 = utils.quartiles(report.per_tile_times)
        lines.append(
            f"total time: {report.total_time:.3f} s "
            f"(mean {utils.mean(report.per_tile_times):.4f} s/tile, "
            f"quartiles {q1:.4f} / {median:.4f} / {q3:.4f})"
        )
    else:
        lines.append(f"total time: {report.total_time:.3f} s")
    if report.timing:
        sweep = pd.DataFrame(
            {
                "seconds": [p.seconds for p in report.timing.values()],
                "detection efficiency": [
                    p.detection_efficiency for p in report.timing.values()
                ],
            },
            index=pd.Index(list(report.timing), name="tiles"),
        )
        sweep.loc["average"] = sweep.mean()
        lines.append("")
        formatters = {"seconds": "{:.3f}".format, "detection efficiency": "{:.4f}".format}
        lines.append(sweep.to_string(formatters=formatters))
    return "\n".join(lines)
