"""Soft-capture training stack.

A compact rigid-body simulator for a free-floating tumbling box target, a
kinematic three-finger gripper with tactile (normal contact force) sensing,
and a from-scratch soft actor-critic learner with a command-line harness
for training, evaluation and tactile-vs-no-tactile comparisons.
"""

__version__ = "0.1.0"
