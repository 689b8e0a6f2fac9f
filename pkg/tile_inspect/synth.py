"""
Synthetic ceramic tiles with injected defects and ground truth.

Everything is driven by splitmix64 so corpora are reproducible across
implementations: output k (k >= 1) for state s is mix(s + k * GAMMA), with
mix the standard splitmix64 finalizer.
"""
import dataclasses
import enum
import logging
import os
from typing import Tuple

import numpy as np
import tqdm

from . import raster, utils
from .config import ClassifierConfig
from .errors import GeometryError, ManifestError, ParamError
from .label import TileMode

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB
PLACEMENT_SALT = 0xD1B54A32D192ED03
REFERENCE_SALT = 0xA5A5A5A5

PLANE_RGB = (182, 170, 150)
MOTIF_RGB = (40, 28, 20)
NOISE_PERMILLE = 20
MAX_NOISE = 3

MANIFEST_HEADER = "# tile_id\timage_path\treference_path\tmode\tdefective\tkinds_csv"


def mix64(z):
    z = ((z ^ (z >> 30)) * MIX_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def below(self, n):
        return self.next() % n

    def block(self, n):
        """
        The next n outputs as a uint64 array, identical to n calls of next().
        """
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GAMMA)
        self.state = (self.state + n * GAMMA) & MASK64
        return _mix64_array(states)


class DefectKind(str, enum.Enum):
    PINHOLE = "pinhole"
    CRACK = "crack"
    BLOB = "blob"
    SPOT = "spot"
    EDGE = "edge"
    CORNER = "corner"


ALL_KINDS = tuple(DefectKind)

# (size, intensity_delta) used by the corpus generator
DEFAULT_GEOMETRY = {
    DefectKind.PINHOLE: (1, -36),
    DefectKind.CRACK: (60, -60),
    DefectKind.BLOB: (5, -60),
    DefectKind.SPOT: (2, -60),
    DefectKind.EDGE: (4, -100),
    DefectKind.CORNER: (24, -100),
}

# Black-white pinpoint: a signed 7x7 pattern scaled by delta / 3. After
# median + Sobel + threshold it leaves a 0 center with 1s on its four
# 4-neighbours and 0 diagonals.
PINHOLE_STENCIL = np.array(
    [
        [0, -2, 3, 1, 3, 1, 3],
        [-1, -1, 2, -3, 3, 0, 2],
        [-3, 2, 3, -2, -1, -3, 0],
        [2, 2, 1, -3, 2, 2, 2],
        [2, -3, 3, -3, 3, 3, -3],
        [3, -3, -3, 0, 3, -3, -3],
        [-3, 1, 3, 3, -3, -3, -3],
    ],
    dtype=np.int64,
)

# 8-neighbourhood, clockwise from east
STEP_ROWS = (0, 1, 1, 1, 0, -1, -1, -1)
STEP_COLS = (1, 1, 0, -1, -1, -1, 0, 1)


@dataclasses.dataclass(frozen=True)
class DefectSpec:
    kind: DefectKind
    position: Tuple[int, int]
    size: int
    intensity_delta: int
    seed: int = 0


@dataclasses.dataclass(frozen=True)
class GroundTruth:
    tile_id: str
    defective: bool
    defects: Tuple[DefectSpec, ...]
    mode: TileMode

    @property
    def kinds(self):
        return sorted({d.kind.value for d in self.defects})


def _printed_motif_mask(size):
    period = size // 8
    half = max(2, period // 6)
    offset = np.arange(size) % period - period // 2
    bar = (offset >= -1) & (offset <= 0)
    arm = (offset >= -half) & (offset <= half - 1)
    horizontal = bar[:, None] & arm[None, :]
    vertical = arm[:, None] & bar[None, :]
    return horizontal | vertical


def impulse_noise(size, rng, amplitude):
    """
    Sparse signed impulses (2% of the pixels off the outer ring), values in
    +-1..+-amplitude, as an int16 offset plane.
    """
    draws = rng.block(size * size).reshape(size, size)
    if amplitude == 0:
        return np.zeros((size, size), dtype=np.int16)
    hit = (draws % np.uint64(1000)) < np.uint64(NOISE_PERMILLE)
    hit[0, :] = hit[-1, :] = hit[:, 0] = hit[:, -1] = False
    v = ((draws >> np.uint64(32)) % np.uint64(2 * amplitude)).astype(np.int16)
    offsets = np.where(v < amplitude, v - amplitude, v - amplitude + 1)
    return np.where(hit, offsets, 0).astype(np.int16)


def generate_tile(mode, size, seed, noise=2, tile_id=None):
    mode = TileMode(mode)
    if size < 64:
        raise ParamError(f"tiles must be at least 64 pixels, got {size}")
    if not 0 <= noise <= MAX_NOISE:
        raise ParamError(f"noise amplitude must be in 0..{MAX_NOISE}, got {noise}")
    img = np.empty((size, size, 3), dtype=np.int16)
    img[...] = PLANE_RGB
    if mode is TileMode.PRINTED:
        img[_printed_motif_mask(size)] = MOTIF_RGB
    rng = SplitMix64(seed)
    img += impulse_noise(size, rng, noise)[..., None]
    img = np.clip(img, 0, 255).astype(np.uint8)
    truth = GroundTruth(
        tile_id=tile_id or f"tile-{seed & MASK64:016x}",
        defective=False,
        defects=(),
        mode=mode,
    )
    return img, truth


def crack_path(spec):
    """
    Row/col coordinates of the crack walk: `size` points, main direction
    and turns drawn from splitmix64(spec.seed).
    """
    rng = SplitMix64(spec.seed)
    direction = rng.below(8)
    r, c = spec.position
    points = []
    for _ in range(spec.size):
        points.append((r, c))
        choice = rng.below(4)
        if choice < 2:
            step = direction
        elif choice == 2:
            step = (direction + 7) % 8
        else:
            step = (direction + 1) % 8
        r += STEP_ROWS[step]
        c += STEP_COLS[step]
    return points


def defect_mask(shape, spec):
    """
    Boolean footprint of a non-pinhole defect. Raises GeometryError when it
    does not fit in an image of `shape`.
    """
    rows, cols = shape
    r0, c0 = spec.position
    size = spec.size
    rr, cc = np.ogrid[:rows, :cols]
    kind = DefectKind(spec.kind)
    if kind is DefectKind.CRACK:
        mask = np.zeros(shape, dtype=bool)
        for r, c in crack_path(spec):
            if not (0 <= r and r + 1 < rows and 0 <= c and c + 1 < cols):
                raise GeometryError(f"crack leaves the tile at ({r}, {c})")
            mask[r : r + 2, c : c + 2] = True
        return mask
    if kind in (DefectKind.BLOB, DefectKind.SPOT):
        if r0 - size < 0 or r0 + size >= rows or c0 - size < 0 or c0 + size >= cols:
            raise GeometryError(f"disk of radius {size} at {spec.position} leaves the tile")
        return (rr - r0) ** 2 + (cc - c0) ** 2 <= size * size
    if kind is DefectKind.EDGE:
        length = 4 * size
        if r0 == 0 or r0 == rows - 1:
            if size > rows or c0 + length > cols:
                raise GeometryError(f"edge chip at {spec.position} leaves the tile")
            band = (rr < size) if r0 == 0 else (rr >= rows - size)
            return band & (cc >= c0) & (cc < c0 + length)
        if c0 == 0 or c0 == cols - 1:
            if size > cols or r0 + length > rows:
                raise GeometryError(f"edge chip at {spec.position} leaves the tile")
            band = (cc < size) if c0 == 0 else (cc >= cols - size)
            return band & (rr >= r0) & (rr < r0 + length)
        raise GeometryError(f"edge chips start on the border, got {spec.position}")
    if kind is DefectKind.CORNER:
        if r0 not in (0, rows - 1) or c0 not in (0, cols - 1):
            raise GeometryError(f"corner chips start at a corner, got {spec.position}")
        if size > min(rows, cols):
            raise GeometryError(f"corner chip of leg {size} does not fit")
        a = rr if r0 == 0 else rows - 1 - rr
        b = cc if c0 == 0 else cols - 1 - cc
        return a + b <= size - 1
    raise GeometryError(f"no footprint for {kind}")


def inject_defect(img, spec):
    raster.check_rgb(img)
    rows, cols = img.shape[:2]
    r0, c0 = spec.position
    if not (0 <= r0 < rows and 0 <= c0 < cols) or spec.size < 1:
        raise GeometryError(f"bad position {spec.position} or size {spec.size}")
    out = img.astype(np.int16)
    if DefectKind(spec.kind) is DefectKind.PINHOLE:
        half = PINHOLE_STENCIL.shape[0] // 2
        if r0 - half < 0 or r0 + half >= rows or c0 - half < 0 or c0 + half >= cols:
            raise GeometryError(f"pinhole at {spec.position} is too close to the border")
        offsets = (PINHOLE_STENCIL * spec.intensity_delta) // 3
        out[r0 - half : r0 + half + 1, c0 - half : c0 + half + 1] += offsets[..., None].astype(
            np.int16
        )
    else:
        out[defect_mask((rows, cols), spec)] += np.int16(spec.intensity_delta)
    return np.clip(out, 0, 255).astype(np.uint8)


def place_defect(kind, sub_seed, size, cfg=None):
    """
    Deterministic DefectSpec for tile `sub_seed`, placed clear of the corner
    zones and edge bands of `cfg`.
    """
    cfg = cfg or ClassifierConfig()
    kind = DefectKind(kind)
    rng = SplitMix64(sub_seed ^ PLACEMENT_SALT)
    dsize, delta = DEFAULT_GEOMETRY[kind]
    if kind is DefectKind.EDGE:
        side = rng.below(4)
        length = 4 * dsize
        lo = cfg.c_range + 4
        hi = size - cfg.c_range - 4 - length
        if hi < lo:
            raise GeometryError(f"no room for an edge chip on a {size} tile")
        along = lo + rng.below(hi - lo + 1)
        position = [(0, along), (size - 1, along), (along, 0), (along, size - 1)][side]
    elif kind is DefectKind.CORNER:
        k = rng.below(4)
        position = (size - 1 if k & 2 else 0, size - 1 if k & 1 else 0)
    else:
        if kind is DefectKind.CRACK:
            margin = dsize + 8
        else:
            margin = cfg.c_range + cfg.e_range + dsize + 8
        span = size - 2 * margin
        if span < 1:
            raise GeometryError(f"no room for a {kind.value} on a {size} tile")
        position = (margin + rng.below(span), margin + rng.below(span))
    return DefectSpec(
        kind=kind,
        position=position,
        size=dsize,
        intensity_delta=delta,
        seed=rng.next(),
    )


def _defective_flags(n, n_defective):
    return [(i + 1) * n_defective // n > i * n_defective // n for i in range(n)]


def generate_corpus(
    n,
    mix,
    seed,
    out_dir,
    size=256,
    kinds=ALL_KINDS,
    modes=(TileMode.PLANE, TileMode.PRINTED),
    noise=2,
    cfg=None,
    verbosity=0,
):
    """
    Write n tiles, one reference per mode and manifest.tsv into `out_dir`.
    Returns the manifest path.
    """
    if n < 1:
        raise ParamError(f"need at least one tile, got n={n}")
    if not 0.0 <= mix <= 1.0:
        raise ParamError(f"mix must be in [0, 1], got {mix}")
    kinds = [DefectKind(k) for k in kinds]
    modes = [TileMode(m) for m in modes]
    if not kinds or not modes:
        raise ParamError("kinds and modes must be non-empty")
    os.makedirs(out_dir, exist_ok=True)

    references = {}
    for mode in modes:
        ref_img, _ = generate_tile(mode, size, seed ^ REFERENCE_SALT, noise)
        name = f"reference_{mode.value}.png"
        raster.save_image(ref_img, os.path.join(out_dir, name))
        references[mode] = name

    n_defective = int(utils.round_half_up(n * mix))
    flags = _defective_flags(n, n_defective)
    logger.info("generating %d tiles (%d defective) into %s", n, n_defective, out_dir)
    tiles = range(n)
    if verbosity:
        tiles = tqdm.tqdm(tiles)
    lines = [MANIFEST_HEADER]
    defect_ordinal = 0
    for i in tiles:
        sub_seed = (seed ^ i) & MASK64
        mode = modes[i % len(modes)]
        tile_id = f"tile_{i:04d}"
        img, _ = generate_tile(mode, size, sub_seed, noise, tile_id=tile_id)
        tile_kinds = "-"
        if flags[i]:
            kind = kinds[defect_ordinal % len(kinds)]
            defect_ordinal += 1
            spec = place_defect(kind, sub_seed, size, cfg)
            img = inject_defect(img, spec)
            logger.debug("%s: %s at %s", tile_id, kind.value, spec.position)
            tile_kinds = kind.value
        image_name = f"{tile_id}.png"
        raster.save_image(img, os.path.join(out_dir, image_name))
        lines.append(
            "\t".join(
                [
                    tile_id,
                    image_name,
                    references[mode],
                    mode.value,
                    "true" if flags[i] else "false",
                    tile_kinds,
                ]
            )
        )
    manifest = os.path.join(out_dir, "manifest.tsv")
    with open(manifest, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return manifest


@dataclasses.dataclass(frozen=True)
class ManifestEntry:
    tile_id: str
    image_path: str
    reference_path: str
    mode: TileMode
    defective: bool
    kinds: Tuple[str, ...]


def read_manifest(path):
    """
    Parse manifest.tsv; image and reference paths come back resolved
    against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise ManifestError(f"{path}:{lineno}: expected 6 fields, got {len(fields)}")
            tile_id, image_path, reference_path, mode, defective, kinds_csv = fields
            try:
                mode = TileMode(mode)
            except ValueError as e:
                raise ManifestError(f"{path}:{lineno}: bad mode {mode!r}") from e
            if defective not in ("true", "false"):
                raise ManifestError(f"{path}:{lineno}: bad defective flag {defective!r}")
            kinds = () if kinds_csv in ("-", "") else tuple(kinds_csv.split(","))
            for kind in kinds:
                if kind not in DefectKind._value2member_map_:
                    raise ManifestError(f"{path}:{lineno}: unknown defect kind {kind!r}")
            if (defective == "true") != bool(kinds):
                raise ManifestError(f"{path}:{lineno}: defective flag disagrees with kinds")
            entries.append(
                ManifestEntry(
                    tile_id=tile_id,
                    image_path=os.path.join(base, image_path),
                    reference_path=os.path.join(base, reference_path),
                    mode=mode,
                    defective=defective == "true",
                    kinds=kinds,
                )
            )
    return entries
