"""Exception hierarchy shared by all modules."""


class DagReluError(Exception):
    """Base class for every error raised by this package."""


class InvalidDag(DagReluError):
    pass


class CycleDetected(InvalidDag):
    pass


class NotABottleneck(DagReluError):
    pass


class TooLarge(DagReluError):
    """An exact enumeration would exceed its configured size cap."""


class MalformedProblem(DagReluError):
    pass


class InvalidTarget(DagReluError):
    pass


class InvalidDataset(DagReluError):
    pass


class DivergenceDetected(DagReluError):
    pass
