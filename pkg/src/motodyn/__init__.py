"""Four-rigid-body motorcycle dynamics and IMU-driven state estimation.

A single-track model with longitudinal/lateral coupling assembled by virtual
power projection, magic-formula tire forces with first-order relaxation, a
fixed-step simulator, and an LQR-designed Luenberger observer that
reconstructs the 14 extended states from accelerations and attitude rates.
"""
from .parameters import (ParameterSet, TireCoefficients, MagicFormulaChannel,
                         ParameterError, load_parameters, loads_parameters,
                         save_parameters, dumps_parameters, default_parameters,
                         parameters_equal, total_mass, derived_com_offset)
from .state import (GeneralizedState, StateError, extended_state,
                    generalized_from_extended, EXT_LABELS, N_EXT, N_U)
from .kinematics import (BodyKinematics, rot_x, rot_y, rot_z, skew_to_vector,
                         body_pose_V, body_pose_world, body_kinematics)
from .multibody import (Wrench, TireForceState, DegenerateConfigurationError,
                        world_inertia, applied_wrenches, mass_matrix,
                        applied_efforts, residual_efforts, generalized_accel)
from .tire import (SlipState, static_loads, slip_state, magic_formula,
                   steady_state_forces, relaxation_rhs)
from .simulator import (Trajectory, InputTrace, SimulationError, SimFailure,
                        extended_rhs, step, simulate, trajectory_to_csv,
                        trajectory_from_csv)
from .estimator import (TrimPoint, LinearObserverDesign, TrimError,
                        LinearizationError, DetectabilityError, RiccatiError,
                        find_trim, linearize, measurement_model, design_gain,
                        design_observer, gauge_direction, observer_step,
                        run_observer, no_slippage_init, synthesize_measurements,
                        unobservable_modes)
from .scenario import Scenario, NoiseSpec, ScenarioError, load_scenario

__version__ = '0.1.0'

__all__ = [
    'ParameterSet', 'TireCoefficients', 'MagicFormulaChannel', 'ParameterError',
    'load_parameters', 'loads_parameters', 'save_parameters', 'dumps_parameters',
    'default_parameters', 'parameters_equal', 'total_mass', 'derived_com_offset',
    'GeneralizedState', 'StateError', 'extended_state', 'generalized_from_extended',
    'EXT_LABELS', 'N_EXT', 'N_U',
    'BodyKinematics', 'rot_x', 'rot_y', 'rot_z', 'skew_to_vector',
    'body_pose_V', 'body_pose_world', 'body_kinematics',
    'Wrench', 'TireForceState', 'DegenerateConfigurationError',
    'world_inertia', 'applied_wrenches', 'mass_matrix', 'applied_efforts',
    'residual_efforts', 'generalized_accel',
    'SlipState', 'static_loads', 'slip_state', 'magic_formula',
    'steady_state_forces', 'relaxation_rhs',
    'Trajectory', 'InputTrace', 'SimulationError', 'SimFailure',
    'extended_rhs', 'step', 'simulate', 'trajectory_to_csv', 'trajectory_from_csv',
    'TrimPoint', 'LinearObserverDesign', 'TrimError', 'LinearizationError',
    'DetectabilityError', 'RiccatiError', 'find_trim', 'linearize',
    'measurement_model', 'design_gain', 'design_observer', 'gauge_direction',
    'observer_step', 'run_observer', 'no_slippage_init', 'synthesize_measurements',
    'unobservable_modes',
    'Scenario', 'NoiseSpec', 'ScenarioError', 'load_scenario',
]
