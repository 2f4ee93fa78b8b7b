"""Exception hierarchy shared by the library and the CLI."""


class MscsError(Exception):
    """Base class for all library errors."""


class InvalidModel(MscsError, ValueError):
    pass


class ModelSpaceMismatch(MscsError, ValueError):
    pass


class PartitionSpaceTooLarge(MscsError):
    """Enumeration would exceed the configured model cap."""


class InvalidData(MscsError, ValueError):
    pass


class DimensionMismatch(MscsError, ValueError):
    pass


class FitError(MscsError):
    """Numerical failure while fitting a candidate model."""


class FitDiverged(FitError):
    pass


class SingularBlock(FitError):
    pass


class RankDeficientDesign(FitError):
    pass


class StateSpaceTooLarge(MscsError):
    pass


class NestingViolation(MscsError):
    """A candidate fit beat the full model by more than round-off."""


class UnsupportedFamily(MscsError):
    pass


class NoSurvivors(MscsError):
    pass


class InvalidSpec(MscsError, ValueError):
    pass
