"""Exception hierarchy shared across the package."""


class SplatarError(Exception):
    """Base class for all package-specific errors."""


class InvalidParamsError(SplatarError):
    """Parameter vector length or shape does not match the rig/asset."""


class RigValidationError(SplatarError):
    """Rig data violates a structural invariant (weights, regressor, tree)."""


class MeshValidationError(SplatarError):
    """Mesh or attribute channels are structurally invalid."""


class BakeError(SplatarError):
    """Bake inputs are inconsistent with the subdivided point count."""

    def __init__(self, channel: str, message: str):
        super().__init__(f"{channel}: {message}")
        self.channel = channel


class ContainerError(SplatarError):
    """Base class for binary container format errors."""


class BadMagicError(ContainerError):
    pass


class UnsupportedVersionError(ContainerError):
    pass


class TruncatedSectionError(ContainerError):
    def __init__(self, section: str, message: str = "section extends past end of file"):
        super().__init__(f"{section}: {message}")
        self.section = section


class SectionFormatError(ContainerError):
    def __init__(self, section: str, message: str):
        super().__init__(f"{section}: {message}")
        self.section = section


class AssetInvariantError(SplatarError):
    """A loaded avatar violates a data invariant; names the offending section."""

    def __init__(self, section: str, message: str):
        super().__init__(f"{section}: {message}")
        self.section = section


class StreamParseError(SplatarError):
    """A driving-stream line failed to parse; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class UsageError(SplatarError):
    """An API was called out of order (e.g. backward without a forward pass)."""
