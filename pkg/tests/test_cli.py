import json
import os

import numpy as np
import pytest

from conftest import plane_tile
from tile_inspect import cli, config, label, raster, synth
from tile_inspect.synth import DefectKind, DefectSpec


@pytest.fixture
def images(tmp_path):
    paths = {
        "clean": str(tmp_path / "clean.png"),
        "reference": str(tmp_path / "reference.png"),
        "blob": str(tmp_path / "blob.png"),
        "small": str(tmp_path / "small.png"),
    }
    raster.save_image(plane_tile(seed=1), paths["clean"])
    raster.save_image(plane_tile(seed=2), paths["reference"])
    raster.save_image(
        plane_tile(seed=99, defects=[DefectSpec(DefectKind.BLOB, (60, 60), 5, -60)]),
        paths["blob"],
    )
    raster.save_image(plane_tile(seed=3, size=128), paths["small"])
    return paths


def test_inspect_clean(images, capsys):
    status = cli.main(["inspect", "--test", images["clean"], "--reference", images["reference"]])
    assert status == 0
    assert "no defect" in capsys.readouterr().out


def test_inspect_blob(images, tmp_path, capsys):
    matrix = str(tmp_path / "label.txt")
    status = cli.main(
        [
            "inspect",
            "--test", images["blob"],
            "--reference", images["reference"],
            "--emit-matrix", matrix,
        ]
    )
    assert status == 1
    out = capsys.readouterr().out
    assert "blob: Found" in out
    assert "corner: Not Found" in out
    assert label.load_matrix(matrix).shape == (256, 256)


def test_inspect_json(images, capsys):
    status = cli.main(
        ["inspect", "--test", images["blob"], "--reference", images["reference"], "--format", "json"]
    )
    assert status == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["defective"] and doc["blob"]["found"]


def test_inspect_trim(images, capsys):
    status = cli.main(
        ["inspect", "--test", images["clean"], "--reference", images["small"], "--trim", "128", "128"]
    )
    assert status == 0


def test_inspect_size_mismatch(images):
    assert cli.main(["inspect", "--test", images["clean"], "--reference", images["small"]]) == 2


def test_inspect_missing_file(images, tmp_path):
    missing = str(tmp_path / "missing.png")
    assert cli.main(["inspect", "--test", missing, "--reference", images["reference"]]) == 2


def test_inspect_bad_config(images, tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("c_range = twelve\n", encoding="utf-8")
    argv = ["inspect", "--test", images["clean"], "--reference", images["reference"]]
    assert cli.main(argv + ["--config", str(cfg)]) == 2


def test_unknown_flag_is_an_error(images):
    with pytest.raises(SystemExit) as exc:
        cli.main(["inspect", "--test", images["clean"], "--reference", images["reference"], "--fast"])
    assert exc.value.code == 2


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("c_range = 12\ntau = 0.3\n", encoding="utf-8")
    args = cli.make_parser().parse_args(
        ["batch", "--manifest", "m.tsv", "--config", str(path), "--tau", "0.4"]
    )
    cfg = config.resolve_config(args)
    assert (cfg.c_range, cfg.tau) == (12, 0.4)


def test_classify_matrix(tmp_path, capsys):
    m = np.zeros((32, 32), dtype=np.uint8)
    m[10:19, 10:19] = 2
    path = str(tmp_path / "m.txt")
    label.save_matrix(m, path)
    assert cli.main(["classify", "--matrix", path]) == 1
    assert "blob: Found" in capsys.readouterr().out

    label.save_matrix(np.zeros((32, 32), dtype=np.uint8), path)
    assert cli.main(["classify", "--matrix", path]) == 0

    with open(path, "w") as f:
        f.write("2 2\n0 9\n0 0\n")
    assert cli.main(["classify", "--matrix", path]) == 2


def test_synth_batch_report(tmp_path, capsys):
    out_dir = str(tmp_path / "corpus")
    status = cli.main(
        ["synth", "--n", "6", "--mix", "0.5", "--seed", "7", "--out", out_dir,
         "--kinds", "blob,corner", "--modes", "plane"]
    )
    assert status == 0
    manifest = os.path.join(out_dir, "manifest.tsv")
    assert capsys.readouterr().out.strip() == manifest
    assert len(synth.read_manifest(manifest)) == 6

    cfg = tmp_path / "cfg.txt"
    cfg.write_text("tau = 0.25\n", encoding="utf-8")
    report = str(tmp_path / "out.csv")
    status = cli.main(
        ["batch", "--manifest", manifest, "--config", str(cfg), "--report", report,
         "--timing", "2,4"]
    )
    assert status == 0
    assert os.path.exists(report)
    out = capsys.readouterr().out
    assert "detection efficiency" in out
    assert "average" in out
    with open(report, encoding="utf-8") as fh:
        summary = [line for line in fh if line.startswith("# timing")]
    assert "# timing.4: " in "".join(summary)
    assert "# timing_efficiency.4: " in "".join(summary)

    converted = str(tmp_path / "out.json")
    assert cli.main(["report", "--input", report, "--output", converted]) == 0
    with open(converted, encoding="utf-8") as f:
        assert len(json.load(f)["tiles"]) == 6


def test_synth_verbose_stdout_is_the_manifest(tmp_path, capsys):
    out_dir = str(tmp_path / "corpus")
    argv = ["synth", "--n", "2", "--mix", "0", "--seed", "3", "--out", out_dir,
            "--size", "64", "--modes", "plane", "--verbosity", "1"]
    assert cli.main(argv) == 0
    assert capsys.readouterr().out.strip() == os.path.join(out_dir, "manifest.tsv")


@pytest.mark.parametrize("jobs", ["0", "-2"])
def test_batch_bad_jobs_is_an_error(tmp_path, jobs):
    out_dir = str(tmp_path / "corpus")
    argv = ["synth", "--n", "2", "--mix", "0", "--seed", "3", "--out", out_dir,
            "--size", "64", "--modes", "plane"]
    assert cli.main(argv) == 0
    manifest = os.path.join(out_dir, "manifest.tsv")
    assert cli.main(["batch", "--manifest", manifest, "--jobs", jobs]) == 2


def test_synth_bad_kind(tmp_path):
    argv = ["synth", "--n", "2", "--mix", "1", "--seed", "1", "--out", str(tmp_path), "--kinds", "glaze"]
    assert cli.main(argv) == 2


def test_report_missing_file(tmp_path):
    assert cli.main(["report", "--input", str(tmp_path / "missing.csv")]) == 2
