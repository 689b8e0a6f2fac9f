import numpy as np
import pytest

from tile_inspect import config, label, synth

RECALL_SEED = 2024


@pytest.fixture
def cfg():
    return config.ClassifierConfig()


@pytest.fixture
def small_cfg():
    # zones small enough for hand-built matrices
    return config.ClassifierConfig(c_range=2, e_range=1, c_length=10)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def plane_tile(seed=99, size=256, noise=2, defects=()):
    img, _ = synth.generate_tile(label.TileMode.PLANE, size, seed, noise)
    for spec in defects:
        img = synth.inject_defect(img, spec)
    return img


@pytest.fixture(scope="session")
def recall_corpora(tmp_path_factory):
    """
    One 100-tile, all-defective, single-kind plane corpus per defect kind.
    """
    manifests = {}
    for kind in synth.ALL_KINDS:
        out_dir = tmp_path_factory.mktemp(f"recall_{kind.value}")
        manifests[kind.value] = synth.generate_corpus(
            n=100,
            mix=1.0,
            seed=RECALL_SEED,
            out_dir=str(out_dir),
            kinds=[kind],
            modes=[label.TileMode.PLANE],
        )
    return manifests


@pytest.fixture(scope="session")
def mixed_corpus(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("mixed")
    return synth.generate_corpus(n=50, mix=0.5, seed=7, out_dir=str(out_dir))
