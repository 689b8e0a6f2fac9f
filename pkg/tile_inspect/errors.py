class TileInspectError(Exception):
    """
    Base class for every error raised on purpose by tile_inspect.

    The command line front end turns any of these into exit status 2.
    """


class DimensionError(TileInspectError, ValueError):
    pass


class DimensionMismatch(DimensionError):
    pass


class DecodeError(TileInspectError, ValueError):
    pass


class ParamError(TileInspectError, ValueError):
    pass


class ConfigError(TileInspectError, ValueError):
    pass


class ModeError(TileInspectError, ValueError):
    pass


class GeometryError(TileInspectError, ValueError):
    pass


class ParseError(TileInspectError, ValueError):
    pass


class ManifestError(TileInspectError, ValueError):
    pass
