"""Exception hierarchy shared by every solver component."""


class AbcfbError(Exception):
    """Base class for all errors raised by the package."""


class StructuralError(AbcfbError, ValueError):
    """Shapes, dimensions or block indices do not match the problem layout."""


class ParameterError(AbcfbError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class StepsizeRuleError(AbcfbError):
    """The stepsizes violate the convergence rule (``delta >= 2``)."""


class ContractError(AbcfbError):
    """A precondition on history, delays or records does not hold."""


class OracleFailure(AbcfbError):
    """A reference computation could not reach its requested accuracy."""


class EngineAbort(AbcfbError):
    """An asynchronous worker died; the engine stopped all workers."""
