"""driftbench: imitation-learned monocular obstacle avoidance under domain shift.

A planar drone simulator with a column renderer, procedural training worlds,
a privileged expert pilot, a from-scratch numpy network core, and the
population evaluation protocol built on top of them.
"""

import os

# Single-threaded BLAS keeps float reductions in a fixed order across runs.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

__version__ = "0.1.0"
