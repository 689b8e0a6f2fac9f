from . import (
    errors,
    utils,
    raster,
    preprocess,
    config,
    detect,
    label,
    classify,
    synth,
    harness,
)
