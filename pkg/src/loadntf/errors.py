"""Exception types shared across the package."""


class LoadNTFError(Exception):
    """Base class for all loadntf errors."""


class InvalidGridError(LoadNTFError):
    """Knot grid is too short, non-increasing, or outside its domain."""


class GridTooCoarseError(LoadNTFError):
    """Temperature quantization collapsed the grid below two bins."""


class DegenerateSiteError(LoadNTFError):
    """A site has no observed days or an all-zero load, so it cannot be
    normalized."""

    def __init__(self, site: str, reason: str):
        self.site = site
        super().__init__(f"site {site!r}: {reason}")


class InternalInconsistencyError(LoadNTFError):
    """A value that should have been on a grid by construction is not."""


class PanelFormatError(LoadNTFError):
    """Malformed panel CSV input; carries the offending line number."""

    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class SolverNumericsError(LoadNTFError):
    """The objective became non-finite; names the offending factor column."""
