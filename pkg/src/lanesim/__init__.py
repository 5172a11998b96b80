"""lanesim: differentiable multi-agent traffic simulation.

A joint actor policy with per-actor latents is trained by unrolling the
simulator and backpropagating through it; scenarios are scored with
collision, rule-violation, reconstruction, and diversity metrics. An
interactive session service exposes the live simulator for scenario
design.
"""

__version__ = "0.1.0"
