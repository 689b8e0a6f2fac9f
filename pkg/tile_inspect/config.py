import dataclasses
import enum
import logging

from .errors import ConfigError
from .preprocess import StretchParams

logger = logging.getLogger(__name__)


class StretchVariant(str, enum.Enum):
    LINEAR = "linear"
    SIGMOID = "sigmoid"


@dataclasses.dataclass
class ClassifierConfig:
    """
    Every tunable of the inspection pipeline.

    The zone sizes, crack threshold and window sizes are in pixels and
    assume 256x256 trimmed tiles.
    """

    c_range: int = 10
    e_range: int = 3
    c_length: int = 64
    blob_matx: int = 7
    spot_matx: int = 3
    tau: float = 0.25
    median_window: int = 3
    stretch_variant: StretchVariant = StretchVariant.SIGMOID
    stretch: StretchParams = dataclasses.field(default_factory=StretchParams)
    detect_margin: int = 0
    ref_dilate: int = 0
    linear_literal_scale: bool = False

    def validate(self):
        if self.c_range < 1 or self.e_range < 1 or self.c_length < 1:
            raise ConfigError(
                f"c_range, e_range and c_length must be >= 1, got "
                f"{self.c_range}, {self.e_range}, {self.c_length}"
            )
        for name in ("blob_matx", "spot_matx", "median_window"):
            val = getattr(self, name)
            if val < 3 or val % 2 == 0:
                raise ConfigError(f"{name} must be odd and >= 3, got {val}")
        if self.spot_matx >= self.blob_matx:
            raise ConfigError(
                f"spot_matx ({self.spot_matx}) must be smaller than blob_matx ({self.blob_matx})"
            )
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must be in (0, 1], got {self.tau}")
        if self.detect_margin < 0 or self.ref_dilate < 0:
            raise ConfigError("detect_margin and ref_dilate must be >= 0")
        try:
            self.stretch.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return self

    def validate_shape(self, rows, cols):
        if 2 * self.c_range >= min(rows, cols):
            raise ConfigError(
                f"corner zones of side {self.c_range} overlap on a {rows}x{cols} matrix"
            )
        return self

    def as_dict(self):
        """
        Flat snapshot, keyed the same way as the config file.
        """
        flat = {}
        for field in dataclasses.fields(self):
            val = getattr(self, field.name)
            if field.name == "stretch":
                for sub in dataclasses.fields(val):
                    flat[f"stretch.{sub.name}"] = getattr(val, sub.name)
            elif isinstance(val, enum.Enum):
                flat[field.name] = val.value
            else:
                flat[field.name] = val
        return flat


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text):
    if text.strip().lower() in ("none", ""):
        return None
    return float(text)


# key -> parser for every key a config file (or a flag) may set
_PARSERS = {
    "c_range": int,
    "e_range": int,
    "c_length": int,
    "blob_matx": int,
    "spot_matx": int,
    "tau": float,
    "median_window": int,
    "stretch_variant": StretchVariant,
    "stretch.M": _parse_optional_float,
    "stretch.E": float,
    "stretch.eps": float,
    "stretch.n_i": int,
    "stretch.i": int,
    "detect_margin": int,
    "ref_dilate": int,
    "linear_literal_scale": _parse_bool,
}


def config_keys():
    return list(_PARSERS)


def apply_overrides(cfg, overrides):
    """
    Return a copy of `cfg` with `overrides` ({key: parsed value}) applied.
    """
    top = {}
    stretch = {}
    for key, val in overrides.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key: {key!r}")
        if key.startswith("stretch."):
            stretch[key.split(".", 1)[1]] = val
        else:
            top[key] = val
    if stretch:
        top["stretch"] = dataclasses.replace(cfg.stretch, **stretch)
    return dataclasses.replace(cfg, **top)


def parse_config_text(text, source="<config>"):
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in overrides:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            overrides[key] = _PARSERS[key](value)
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {e}") from e
    return overrides


def load_config(path, base=None):
    """
    Read a `key = value` config file on top of `base` (defaults if None).
    """
    with open(path, "r", encoding="utf-8") as f:
        overrides = parse_config_text(f.read(), source=str(path))
    cfg = apply_overrides(base or ClassifierConfig(), overrides)
    return cfg.validate()


def format_value(val):
    if isinstance(val, enum.Enum):
        return str(val.value)
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    return str(val)


def save_config(cfg, path):
    lines = ["# tile_inspect classifier config"]
    for key, val in cfg.as_dict().items():
        lines.append(f"{key} = {format_value(val)}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _flag_dest(key):
    return key.replace(".", "_")


def add_args(parser):
    """
    Add one flag per config key to an argparser. Every flag defaults to
    None so `resolve_config` can tell which ones were given.
    """
    parser.add_argument(
        "--config", type=str, default=None, help="key = value config file"
    )
    parser.add_argument(
        "--c_range", type=int, default=None, help="corner zone side length (pixels)"
    )
    parser.add_argument(
        "--e_range", type=int, default=None, help="edge band width (pixels)"
    )
    parser.add_argument(
        "--c_length",
        type=int,
        default=None,
        help="a label-1 component larger than this is a crack",
    )
    parser.add_argument(
        "--blob_matx", type=int, default=None, help="blob window side (odd)"
    )
    parser.add_argument(
        "--spot_matx", type=int, default=None, help="spot window side (odd)"
    )
    parser.add_argument(
        "--tau", type=float, default=None, help="binarization threshold fraction"
    )
    parser.add_argument(
        "--median_window", type=int, default=None, help="median filter window (odd)"
    )
    parser.add_argument(
        "--stretch_variant",
        type=StretchVariant,
        choices=list(StretchVariant),
        default=None,
        help="contrast stretch used by the pipeline",
    )
    parser.add_argument(
        "--stretch_M",
        type=float,
        default=None,
        help="sigmoid midpoint in [0, 1] (default: mean of the median-filtered image)",
    )
    parser.add_argument(
        "--stretch_E", type=float, default=None, help="sigmoid slope exponent"
    )
    parser.add_argument(
        "--stretch_n_i", type=int, default=None, help="number of intensity levels"
    )
    parser.add_argument(
        "--stretch_i", type=int, default=None, help="initial intensity level"
    )
    parser.add_argument(
        "--detect_margin",
        type=int,
        default=None,
        help="a tile is defective when n1 > n2 + detect_margin",
    )
    parser.add_argument(
        "--ref_dilate",
        type=int,
        default=None,
        help="dilate the reference mask by this many pixels before subtraction",
    )
    parser.add_argument(
        "--linear_literal_scale",
        type=_parse_bool,
        default=None,
        help="use n_i / (max - min) instead of (n_i - 1) / (max - min)",
    )


def resolve_config(args):
    """
    Built-in defaults, then the --config file, then explicit flags.
    """
    cfg = ClassifierConfig()
    config_path = getattr(args, "config", None)
    if config_path:
        cfg = load_config(config_path, base=cfg)
    flags = {}
    for key in _PARSERS:
        val = getattr(args, _flag_dest(key), None)
        if val is not None:
            flags[key] = val
    if flags:
        logger.debug("config flags override: %s", flags)
        cfg = apply_overrides(cfg, flags)
    return cfg.validate()
