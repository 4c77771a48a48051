"""Exception types raised across the package."""


class NcDevError(Exception):
    """Base class for all package errors."""


class NotSelfAdjoint(NcDevError, ValueError):
    pass


class NotPositive(NcDevError, ValueError):
    pass


class SpecMismatch(NcDevError, ValueError):
    """A subalgebra spec is incompatible with the algebra it is applied to."""


class NotMartingale(NcDevError, ValueError):
    pass


class NotIndependent(NcDevError, ValueError):
    pass


class NotMeanZero(NcDevError, ValueError):
    pass


class NormalizationFailed(NcDevError, ValueError):
    pass


class AlphaOutOfRange(NcDevError, ValueError):
    pass


class GridTooCoarse(NcDevError, ValueError):
    pass


class WindowOverflow(NcDevError, ValueError):
    """A shift would move support outside the finite window."""


class BadSpec(NcDevError, ValueError):
    pass


class ConfigInvalid(NcDevError, ValueError):
    pass
