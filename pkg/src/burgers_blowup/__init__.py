"""Multi-point self-similar blowup of the inviscid Burgers equation.

Exact characteristic solutions, the self-similar profiles ``Psi_i`` and
numerical monitors for the decay of the perturbation around a sum of
profiles.
"""

from .characteristics import (BlowupReport, InitialData, blowup_detect, h_compute,
                              solve_characteristics, y_trajectory, Y_selfsim)
from .errors import (BlowupError, BlowupProximityError, ConfigurationError, DomainError,
                     NumericalFailure, SingularWeightError)
from .profiles import (EigenfunctionSpec, OperatorContext, Profile, a_field_speed, eigen_residual,
                       phi_eval, profile_derivs, profile_eval, residual_selfsimilar)
from .scenario_io import dumps_scenario, load_scenario, loads_scenario
from .scenarios import (DiagnosticsReport, PerturbationSpec, Scenario, build_initial_data,
                        calibrate_perturbation, run_verification, sweep)
from .selfsim import (Frame, MonitorConstants, MonitorLedger, NormConfig, evolution_residual,
                      weighted_norm)

__version__ = "0.1.0"
