"""Numerical toolkit for redundant records of a decohering system: entropic
quantities, channels and recovery maps, partial-information scans, and
collision models with intra-environment memory.
"""
from .channels import (AFWReport, Channel, Stinespring, afw_mi_bound, afw_scenario, apply, cmi_afw_bound,
                       epsilon_deviation, holevo_monotonicity_check, petz_recovery, recovery_bound_check)
from .darwinism import (CMIScalingReport, DarwinReport, DiscordBoundReport, PIPCurve, PIPPoint, SamplingConfig,
                        cmi_scaling_check, discord_bound_check, pip_scan, plateau_detect)
from .errors import (ArgumentError, CapacityError, DarwinLabError, DegenerateInputError, DegenerateSupportError,
                     PreconditionError)
from .infotheory import (MeasurementOptResult, OptimizerConfig, accessible_J, avg_fragmentary_discord,
                         conditional_mutual_information, discord, entropy, holevo_of_ensemble, holevo_pointer,
                         measure_and_condition, mutual_information, pointer_entropy)
from .nonmarkov import (BackflowSeries, ModelConfig, Trajectory, blp_series, bound22_check, bound29_check,
                        cmi_backflow_series, good_decoherence_factor, redundancy_vs_nonmarkovianity_sweep,
                        run_model)
from .states import (Ensemble, PointerBasis, QState, RandomSpec, branching_state, ghz_state,
                     overlap_branching_state, random_ensemble, random_state)
from .tensor import HilbertSpace, SubsystemLabel, partial_trace

__version__ = "0.1.0"
