"""Exception hierarchy shared by every module."""


class AmenactError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""


class KindMismatch(AmenactError, TypeError):
    pass


class DepthExceeded(AmenactError):
    pass


class UnknownGenerator(AmenactError, KeyError):
    pass


class NotInImage(AmenactError, ValueError):
    pass


class NoMembershipOracle(AmenactError):
    pass


class CommensurationNotCertified(AmenactError):
    pass


class IndexMismatch(AmenactError, ValueError):
    pass


class DepthGuard(AmenactError, ValueError):
    pass


class NotTwoGroup(AmenactError):
    pass


class RadiusTooSmall(AmenactError, ValueError):
    pass


class BudgetExceeded(AmenactError):
    pass


class NotATree(AmenactError, ValueError):
    pass


class NotARay(AmenactError, ValueError):
    pass


class TransversalIncomplete(AmenactError):
    pass


class TransversalRedundant(AmenactError):
    pass


class NotLevelTransitive(AmenactError):
    pass


class UnknownSpec(AmenactError, ValueError):
    pass
