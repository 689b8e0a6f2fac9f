import os

import numpy as np
import pytest

from tile_inspect import config, detect, label, preprocess, raster, synth
from tile_inspect.errors import GeometryError, ManifestError, ParamError
from tile_inspect.synth import DefectKind, DefectSpec


def test_splitmix_reference_values():
    # first outputs of splitmix64 seeded with 0
    rng = synth.SplitMix64(0)
    assert rng.next() == 0xE220A8397B1DCDAF
    assert rng.next() == 0x6E789E6AA1B965F4
    assert rng.next() == 0x06C45D188009454F


def test_splitmix_block_matches_next():
    a, b = synth.SplitMix64(12345), synth.SplitMix64(12345)
    block = a.block(17)
    assert [int(v) for v in block] == [b.next() for _ in range(17)]
    assert a.next() == b.next()


@pytest.mark.parametrize("mode", list(label.TileMode))
def test_generate_tile_is_deterministic(mode):
    a, truth = synth.generate_tile(mode, 96, seed=42)
    b, _ = synth.generate_tile(mode, 96, seed=42)
    assert np.array_equal(a, b)
    assert a.shape == (96, 96, 3) and a.dtype == np.uint8
    assert not truth.defective and truth.defects == ()
    assert truth.mode is mode


def test_noise_stays_small_and_off_the_border():
    clean, _ = synth.generate_tile(label.TileMode.PLANE, 128, seed=1, noise=0)
    noisy, _ = synth.generate_tile(label.TileMode.PLANE, 128, seed=1, noise=3)
    diff = noisy.astype(int) - clean.astype(int)
    assert np.abs(diff).max() <= 3
    assert (diff[..., 0] == diff[..., 1]).all() and (diff[..., 1] == diff[..., 2]).all()
    assert not diff[0].any() and not diff[-1].any()
    assert not diff[:, 0].any() and not diff[:, -1].any()
    assert 0.005 < np.count_nonzero(diff[..., 0]) / diff[..., 0].size < 0.04


def test_plane_tile_colour():
    img, _ = synth.generate_tile(label.TileMode.PLANE, 64, seed=0, noise=0)
    assert (img == np.array(synth.PLANE_RGB, dtype=np.uint8)).all()


def test_printed_reference_edges_do_not_depend_on_seed():
    cfg = config.ClassifierConfig()
    outs = [
        preprocess.preprocess_pipeline(
            synth.generate_tile(label.TileMode.PRINTED, 128, seed, noise=0)[0], cfg
        )
        for seed in (0, 1, 99)
    ]
    assert outs[0].any()
    assert all(np.array_equal(outs[0], o) for o in outs[1:])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_clean_tile_passes_against_reference(seed):
    cfg = config.ClassifierConfig()
    tile, _ = synth.generate_tile(label.TileMode.PLANE, 256, seed, noise=0)
    ref, _ = synth.generate_tile(label.TileMode.PLANE, 256, seed ^ synth.REFERENCE_SALT, noise=0)
    result = detect.detect_defect(
        preprocess.preprocess_pipeline(tile, cfg), preprocess.preprocess_pipeline(ref, cfg)
    )
    assert not result.defective


def test_generate_tile_rejects_bad_params():
    with pytest.raises(ParamError):
        synth.generate_tile(label.TileMode.PLANE, 32, seed=0)
    with pytest.raises(ParamError):
        synth.generate_tile(label.TileMode.PLANE, 64, seed=0, noise=4)


def blank(size=64):
    return synth.generate_tile(label.TileMode.PLANE, size, 0, noise=0)[0]


def changed(before, after):
    return np.any(before != after, axis=2)


def test_pinhole_stencil_is_centered():
    img = blank()
    out = synth.inject_defect(img, DefectSpec(DefectKind.PINHOLE, (30, 40), 1, -36))
    mask = changed(img, out)
    rows, cols = np.nonzero(mask)
    assert rows.min() >= 27 and rows.max() <= 33
    assert cols.min() >= 37 and cols.max() <= 43
    assert mask[30, 40]


def test_blob_is_a_disk():
    img = blank()
    out = synth.inject_defect(img, DefectSpec(DefectKind.BLOB, (32, 32), 5, -60))
    mask = changed(img, out)
    rr, cc = np.ogrid[:64, :64]
    assert np.array_equal(mask, (rr - 32) ** 2 + (cc - 32) ** 2 <= 25)
    assert int(out[32, 32, 0]) == synth.PLANE_RGB[0] - 60


def test_crack_is_deterministic_and_connected():
    img = blank(128)
    spec = DefectSpec(DefectKind.CRACK, (64, 64), 30, -60, seed=9)
    out = synth.inject_defect(img, spec)
    assert np.array_equal(out, synth.inject_defect(img, spec))
    path = synth.crack_path(spec)
    assert len(path) == 30 and path[0] == (64, 64)
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        assert max(abs(r1 - r0), abs(c1 - c0)) == 1
    assert changed(img, out).sum() >= 30


def test_edge_and_corner_geometry():
    img = blank()
    out = synth.inject_defect(img, DefectSpec(DefectKind.EDGE, (0, 20), 4, -100))
    mask = changed(img, out)
    assert mask[:4, 20:36].all() and mask.sum() == 4 * 16

    out = synth.inject_defect(img, DefectSpec(DefectKind.EDGE, (30, 63), 3, -100))
    mask = changed(img, out)
    assert mask[30:42, 61:].all() and mask.sum() == 3 * 12

    out = synth.inject_defect(img, DefectSpec(DefectKind.CORNER, (63, 0), 5, -100))
    mask = changed(img, out)
    assert mask.sum() == 15
    assert mask[63, 0] and mask[59, 0] and mask[63, 4] and not mask[59, 1]


@pytest.mark.parametrize(
    "spec",
    [
        DefectSpec(DefectKind.BLOB, (2, 30), 5, -60),
        DefectSpec(DefectKind.PINHOLE, (1, 30), 1, -36),
        DefectSpec(DefectKind.EDGE, (10, 10), 4, -100),
        DefectSpec(DefectKind.EDGE, (0, 60), 4, -100),
        DefectSpec(DefectKind.CORNER, (0, 10), 5, -100),
        DefectSpec(DefectKind.CRACK, (0, 0), 60, -60),
        DefectSpec(DefectKind.SPOT, (64, 10), 2, -60),
        DefectSpec(DefectKind.SPOT, (20, 20), 0, -60),
    ],
)
def test_inject_rejects_specs_that_do_not_fit(spec):
    with pytest.raises(GeometryError):
        synth.inject_defect(blank(), spec)


@pytest.mark.parametrize("kind", list(DefectKind))
def test_place_defect_fits_and_repeats(kind):
    for sub_seed in range(20):
        spec = synth.place_defect(kind, sub_seed, 256)
        assert spec == synth.place_defect(kind, sub_seed, 256)
        synth.inject_defect(blank(256), spec)


def test_placement_stays_clear_of_corner_zones():
    cfg = config.ClassifierConfig()
    for sub_seed in range(50):
        spec = synth.place_defect(DefectKind.EDGE, sub_seed, 256, cfg)
        r0, c0 = spec.position
        along = c0 if r0 in (0, 255) else r0
        assert along >= cfg.c_range and along + 4 * spec.size <= 256 - cfg.c_range


def read_lines(path):
    with open(path, encoding="utf-8") as f:
        return f.read().split("\n")


def test_corpus_all_clean(tmp_path):
    manifest = synth.generate_corpus(10, 0.0, seed=3, out_dir=str(tmp_path), size=64)
    lines = read_lines(manifest)
    assert lines[0] == synth.MANIFEST_HEADER
    entries = synth.read_manifest(manifest)
    assert len(entries) == 10
    assert not any(e.defective for e in entries)
    assert all(e.kinds == () for e in entries)
    assert os.path.exists(tmp_path / "reference_plane.png")
    assert os.path.exists(tmp_path / "reference_printed.png")
    assert os.path.exists(tmp_path / "tile_0009.png")


def test_corpus_all_defective(tmp_path):
    manifest = synth.generate_corpus(10, 1.0, seed=3, out_dir=str(tmp_path), size=160)
    entries = synth.read_manifest(manifest)
    assert all(e.defective for e in entries)
    assert [e.kinds[0] for e in entries[:7]] == [
        "pinhole", "crack", "blob", "spot", "edge", "corner", "pinhole"
    ]
    assert [e.mode.value for e in entries[:3]] == ["plane", "printed", "plane"]


def test_corpus_mix_spreads_defects(tmp_path):
    manifest = synth.generate_corpus(10, 0.3, seed=3, out_dir=str(tmp_path), size=64,
                                     kinds=[DefectKind.BLOB])
    flags = [e.defective for e in synth.read_manifest(manifest)]
    assert sum(flags) == 3
    assert flags == [False, False, False, True, False, False, True, False, False, True]


def test_corpus_is_reproducible(tmp_path):
    a = synth.generate_corpus(50, 0.5, seed=7, out_dir=str(tmp_path / "a"), size=160)
    b = synth.generate_corpus(50, 0.5, seed=7, out_dir=str(tmp_path / "b"), size=160)
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()
    img_a = raster.load_image(str(tmp_path / "a" / "tile_0013.png"))
    img_b = raster.load_image(str(tmp_path / "b" / "tile_0013.png"))
    assert np.array_equal(img_a, img_b)


def test_corpus_rejects_bad_arguments(tmp_path):
    with pytest.raises(ParamError):
        synth.generate_corpus(0, 0.5, seed=1, out_dir=str(tmp_path))
    with pytest.raises(ParamError):
        synth.generate_corpus(5, 1.5, seed=1, out_dir=str(tmp_path))


@pytest.mark.parametrize(
    "line",
    [
        "t0\ta.png\tr.png\tplane\ttrue",
        "t0\ta.png\tr.png\tglossy\tfalse\t-",
        "t0\ta.png\tr.png\tplane\tmaybe\t-",
        "t0\ta.png\tr.png\tplane\ttrue\tscratch",
        "t0\ta.png\tr.png\tplane\ttrue\t-",
        "t0\ta.png\tr.png\tplane\tfalse\tblob",
    ],
)
def test_read_manifest_errors(tmp_path, line):
    path = tmp_path / "manifest.tsv"
    path.write_text(synth.MANIFEST_HEADER + "\n" + line + "\n", encoding="utf-8")
    with pytest.raises(ManifestError):
        synth.read_manifest(str(path))


def test_read_manifest_resolves_paths(tmp_path):
    path = tmp_path / "manifest.tsv"
    path.write_text(
        synth.MANIFEST_HEADER + "\nt0\ta.png\tr.png\tprinted\ttrue\tblob,crack\n",
        encoding="utf-8",
    )
    (entry,) = synth.read_manifest(str(path))
    assert entry.image_path == os.path.join(str(tmp_path), "a.png")
    assert entry.mode is label.TileMode.PRINTED
    assert entry.kinds == ("blob", "crack")
