"""Reproducible random streams.

Every random draw in the package comes from a Philox (counter-based)
generator keyed by a :class:`numpy.random.SeedSequence` built from
``entropy=base_seed`` and ``spawn_key=(stream_index, *extra)``.  Consumers
append their own integer keys:

* ``simulate`` uses no extra key: ``(stream_index,)``.
* ``run_trials`` uses the trial index: ``(stream_index, t)``.  The harness
  passes the horizon index as ``stream_index``, so trial ``t`` of horizon
  ``h`` draws from ``spawn_key=(h, t)``.
* Monte-Carlo divergence estimators use the chunk index:
  ``(stream_index, c)`` with a fixed chunk size, so results do not depend on
  how chunks are distributed over workers.
"""

from dataclasses import dataclass

import numpy as np

_U64 = 2**64


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int = 0
    stream_index: int = 0

    def __post_init__(self):
        for name in ("base_seed", "stream_index"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if not 0 <= int(value) < _U64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.base_seed),
            spawn_key=(int(self.stream_index),) + tuple(int(k) for k in key),
        )
        return np.random.Generator(np.random.Philox(ss))
