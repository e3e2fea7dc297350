"""Named, replayable random streams.

Every stochastic component takes a RandomStream instead of touching a
global generator. A stream is identified by (seed, stream_id) on top of
numpy's counter-based Philox engine: reconstructing a stream with the
same identity replays the same sequence from the start, and spawned
children are independent of the parent and of each other.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix(a: int, b: int) -> int:
    # splitmix64 finaliser over the combined word; spreads child ids
    z = (a * 0x9E3779B97F4A7C15 + b + 0x632BE59BD9B4E019) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _n_drawn(shape) -> int:
    if shape == () or shape is None:
        return 1
    return int(np.prod(shape))


@dataclass
class RandomStream:
    """A replayable source of randomness keyed by (seed, stream_id).

    counter records how many values have been drawn; it is bookkeeping
    for logs and tests, not part of the stream identity.
    """

    seed: int
    stream_id: int = 0
    counter: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        key = [self.seed & _MASK64, self.stream_id & _MASK64]
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, index: int) -> "RandomStream":
        """Independent child stream; same (parent, index) -> same child."""
        return RandomStream(self.seed, _mix(self.stream_id, index))

    def normal(self, shape=()) -> np.ndarray:
        out = self._gen.standard_normal(shape)
        self.counter += _n_drawn(shape)
        return out

    def uniform(self, shape=()) -> np.ndarray:
        out = self._gen.random(shape)
        self.counter += _n_drawn(shape)
        return out

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        out = self._gen.integers(low, high, size=shape)
        self.counter += _n_drawn(shape)
        return out


def draw_gaussian(stream: RandomStream, n: int) -> np.ndarray:
    """n standard-normal draws from the stream."""
    return stream.normal((n,))
