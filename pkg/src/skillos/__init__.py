"""Skill-ecosystem operating layer.

Organizes large skill corpora into a capability tree, retrieves and
orchestrates skills into strategy-differentiated DAG plans, executes them
with layered parallelism and artifact flow, and ranks competing systems
via position-debiased pairwise judging aggregated with a Bradley-Terry
model.
"""

__version__ = "0.1.0"
