"""Filter-aware model-predictive control with learned trackability constraints.

A planning agent's state estimator can fail in predictable places (heavy
observation noise, blacked-out sensors). This package learns where, as a
function of state, and makes a sampling-based MPC planner avoid those regions
through a chance constraint and a constraint-aware geodesic terminal cost.
"""

from .arm import ArmConfig, ArmEnv
from .core import (EnvironmentSpec, Rollout, derive_seed, discounted_return,
                   load_rollouts, save_rollouts, simulate_rollout)
from .darkzone import DarkZoneConfig, DarkZoneEnv
from .experiment import (ExperimentConfig, MetricsReport, default_config,
                         load_config, run_collect, run_eval, run_train)
from .geodesic import DistanceField, compute_field, constrained_field, query
from .nn import Mlp, adam_step, forward, grad_mse, init_mlp, load_mlp, polyak_update, save_mlp
from .pfilter import (FilterConfig, ParticleBelief, ParticleFilter,
                      init_perfect_carry, point_estimate, tracking_error)
from .planner import (ConstraintSpec, MpcPolicy, Plan, PlannerConfig,
                      evaluate_plan, evaluate_plans, mpc_policy_step,
                      propose_plans, select_plan)
from .trackability import (RolloutChunk, TrackTrainConfig, chunk_rollouts,
                           collect_dataset, heatmap, lambda_return, train)

__version__ = "0.1.0"
