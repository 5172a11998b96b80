from .interaction import InteractionStage, full_edges, relative_box_corners
from .joint import JointPolicy, plan_headings
from .store import load_policy, save_policy

__all__ = [
    "InteractionStage",
    "JointPolicy",
    "full_edges",
    "load_policy",
    "plan_headings",
    "relative_box_corners",
    "save_policy",
]
