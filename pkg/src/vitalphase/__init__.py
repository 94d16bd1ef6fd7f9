"""Quadrature radar vital-sign processing: synthesis, DC calibration, phase
demodulation, metrics and a Monte-Carlo experiment harness."""

__version__ = "0.1.0"

from .series import IqSeries, PhaseSeries
from .signal_model import (AmplitudeProfile, DcProfile, MotionProfile, ScenarioError,
                           Synthesis, VitalSignScenario, chest_displacement,
                           benchmark_scenario, synthesize, true_phase)
from .calibration import (CalibrationError, DcEstimate, ExtremaSet, InsufficientExtremaError,
                          calibrate, circle_fit_dc, circle_fit_estimate, find_extrema,
                          peak_valley_dc_samples, peak_valley_estimate, windowed_dc)
from .demod import (DegenerateQuadratureError, DemodulationError, StationaryTrajectoryError,
                    acaa_demod, atan_demod, differentiate, hadcm, hilbert, mdacm_demod)
from .metrics import (MetricsRow, SpectrumResult, dc_relative_error, displacement_rmse,
                      estimate_rate, spectrum)
