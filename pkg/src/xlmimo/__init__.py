"""Joint visibility-region detection and channel estimation for XL-MIMO arrays.

Library + CLI simulator: near-field UPA geometry, polar-domain sparse
representation with a dynamic grid, a 2D Markov visibility prior,
inverse-free variational Bayesian channel estimation, structured EP
visibility detection, gradient-ascent grid refinement, and a seeded
Monte-Carlo experiment harness with baselines.
"""

from .experiment import VARIANTS, ExperimentConfig, TrialResult, run_experiment
from .geometry import (
    ArrayConfig,
    ScattererParams,
    antenna_position,
    exact_distance,
    fresnel_distance,
    rayleigh_distance,
    steering_exact,
    steering_fresnel,
)
from .metrics import nmse, vr_error_rate
from .pipeline import run_alternating_map, run_subarray_omp
from .polar_grid import (
    PolarGrid,
    VisibilityMap,
    build_fixed_grid,
    dictionary,
    effective_sensing_matrix,
    vr_dictionary,
)
from .priors import HierarchicalPriorParams, Markov2DParams, calibrate_markov
from .scene import ChannelScene, Observation, observe, sample_scene, sample_vr

__version__ = "0.1.0"
