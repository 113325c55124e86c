"""Exception hierarchy shared by every netsing module."""

__all__ = [
    "NetsingError",
    "SchemaError",
    "DuplicateEdgeModel",
    "DisconnectedGraph",
    "HypothesesViolated",
    "NumericalError",
    "SingularInternalBlock",
    "SingularJacobian",
    "DegenerateKernel",
    "AmbiguousKernel",
    "NoConvergence",
    "IllConditionedStencil",
    "InconsistentCertificate",
    "SeedDivergence",
    "StepUnderflow",
    "RefinementFailure",
]


class NetsingError(Exception):
    """Base class for all library errors."""


class SchemaError(NetsingError):
    """Invalid network description; ``location`` is a JSON-pointer-like path."""

    def __init__(self, location, message):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}" if location else message)


class DuplicateEdgeModel(SchemaError):
    pass


class DisconnectedGraph(NetsingError):
    pass


class HypothesesViolated(NetsingError):
    pass


class NumericalError(NetsingError):
    """Base class for numerical failures (CLI exit code 3)."""


class SingularInternalBlock(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


class DegenerateKernel(NumericalError):
    pass


class AmbiguousKernel(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class IllConditionedStencil(NumericalError):
    pass


class InconsistentCertificate(NumericalError):
    pass


class SeedDivergence(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class RefinementFailure(NumericalError):
    pass
