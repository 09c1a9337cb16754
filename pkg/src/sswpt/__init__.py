"""Series-series WPT simulator with primary-side secondary-resonance identification."""
from .controller import (
    CalibrationTable,
    ControllerConfig,
    Mode,
    SessionTrace,
    TuneMode,
    pi_update,
    run_session,
    self_check,
    tune_to_target,
)
from .errors import (
    DomainError,
    EstimationError,
    MeasurementSaturationError,
    ReportIOError,
    SccRangeError,
    ScenarioError,
    SingularSystemError,
    WptError,
)
from .identify import IdentifyConfig, estimate_from_pair, ideal_tangent, two_step_identify
from .measurement import DisturbanceModel, measured_phase, probe_impedance_angle
from .scc import SccState, angle_for_capacitance, capacitance_range_check, scc_equivalent_capacitance
from .tank import TankParams, input_impedance, resonant_frequency, solve_tank, transfer_metrics

__version__ = "0.1.0"
