from .constraints import latent_optimize, reject_and_resample
from .engine import RolloutEnv, SimulationError, TickView, commit_steps, rollout, sample_rng
from .planner import PolicyPlanner, ScriptedPlanner, TickContext
from .scene import ActorTrack, InitialScene, Scenario, initial_from_scenario

__all__ = [
    "ActorTrack",
    "InitialScene",
    "PolicyPlanner",
    "RolloutEnv",
    "Scenario",
    "ScriptedPlanner",
    "SimulationError",
    "TickContext",
    "TickView",
    "commit_steps",
    "initial_from_scenario",
    "latent_optimize",
    "reject_and_resample",
    "rollout",
    "sample_rng",
]
