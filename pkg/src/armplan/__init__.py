"""Base-pose planning for two RCM-constrained surgical manipulator arms.

The package computes reachability and collision-free scores for sampled
two-arm base setups, trains a fast kernel-perceptron proxy for the geometric
collision checker, fits smooth kernel regressors to the scores, and searches
the weighted-sum objective for the best setup. Candidate setups are graded
on canonical circular trajectories inside the region of interest.
"""

__version__ = "0.1.0"
