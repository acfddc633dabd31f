"""bevpilot: a desk-scale end-to-end vision driving stack.

Multi-camera features are lifted into a bird's-eye-view grid, accumulated over
past frames in the current ego frame, rolled into probabilistic futures, and
consumed by a sampling-based planner with a learned cost head. The whole stack
trains with hand-derived gradients on plain numpy.
"""

__version__ = "0.1.0"
