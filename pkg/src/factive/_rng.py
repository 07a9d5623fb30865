"""Counter-based random streams for reproducible trial simulation.

Every random decision in a simulated trial is drawn from its own Philox
counter plane, keyed by (master seed, replicate index).  A plane is a
disjoint region of the Philox counter space, and the value at position i
within a plane belongs to unit i (e.g. the i-th eligible patient).  Streams
are therefore pure functions of (seed, replicate, plane); enlarging a cohort
appends draws without perturbing existing ones, and the order in which
decisions are evaluated is irrelevant.

Planes are separated per eligibility class so that changing the size of one
class never touches the other class's assignments or outcomes.
"""

from __future__ import annotations

import numpy as np

# Fixed plane identifiers.  Values are arbitrary but frozen: changing them
# changes every simulated trial.
PART_ELIGIBLE = 0          # eligible patients: Part A vs Part B
CONDITIONS_BROADER = 1     # broader patients: RCT vs cRW conditions
TREATMENT_ELIGIBLE = 2
TREATMENT_BROADER = 3
NOISE_ELIGIBLE = 4
NOISE_BROADER = 5
ICE_ELIGIBLE = 6
ICE_BROADER = 7

# Covariate component j of class c lives at base + j, so adding components
# never reshuffles existing ones.
COVARIATE_ELIGIBLE_BASE = 1 << 16
COVARIATE_BROADER_BASE = 1 << 17

_MASK64 = (1 << 64) - 1


class CounterStreams:
    """Family of independent streams derived from (seed, replicate)."""

    def __init__(self, seed: int, replicate: int = 0):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if replicate < 0:
            raise ValueError("replicate must be a non-negative integer")
        self.seed = int(seed)
        self.replicate = int(replicate)

    def _generator(self, plane: int) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.replicate & _MASK64],
                       dtype=np.uint64)
        counter = np.array([0, 0, plane & _MASK64, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=key))

    def uniforms(self, plane: int, n: int) -> np.ndarray:
        """First n uniform(0,1) values of the plane."""
        return self._generator(plane).random(n)

    def normals(self, plane: int, n: int) -> np.ndarray:
        """First n standard normal values of the plane."""
        return self._generator(plane).standard_normal(n)
