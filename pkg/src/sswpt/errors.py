"""Exception hierarchy shared by the simulator modules."""


class WptError(Exception):
    """Base class for every error raised by sswpt."""


class DomainError(WptError, ValueError):
    """An argument lies outside the physical or mathematical domain."""


class SingularSystemError(WptError, ArithmeticError):
    """The two-mesh KVL system has no unique solution."""


class SccRangeError(DomainError):
    """A requested capacitance cannot be realised by the SCC branch."""


class EstimationError(WptError, ArithmeticError):
    """Two probe readings do not determine a real resonant frequency."""


class MeasurementSaturationError(WptError):
    """The measured impedance angle reached +-90 degrees."""


class ScenarioError(WptError, ValueError):
    """A scenario definition is malformed or references an unknown built-in."""


class ReportIOError(WptError, OSError):
    """Writing or reading a report or calibration file failed."""
