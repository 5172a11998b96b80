from ..collision import circle_centers, circle_layout, collision_loss
from .adam import Adam
from .evaluate import evaluate_policy
from .loop import ScenarioLoss, Trainer
from .losses import imitation_loss, lambda_weight
from .modes import MODES, mode_config

__all__ = [
    "Adam",
    "MODES",
    "ScenarioLoss",
    "Trainer",
    "circle_centers",
    "circle_layout",
    "collision_loss",
    "evaluate_policy",
    "imitation_loss",
    "lambda_weight",
    "mode_config",
]
