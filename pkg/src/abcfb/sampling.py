"""Random streams and alias-method block selection.

Every run owns a :class:`numpy.random.SeedSequence` built from its 64-bit seed.
Children of that sequence feed independent Philox generators (a counter-based
bit generator), one for block selection and one for delays, so the delay
process cannot depend on the selected blocks.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

__all__ = ["SELECTION", "DELAYS", "make_streams", "UniformStream", "AliasTable", "sample_block"]

SELECTION = 0
DELAYS = 1

_BUFFER = 4096


def make_streams(seed: int, count: int = 2, key=()) -> list:
    """``count`` independent Philox generators derived from ``seed``.

    ``key`` extends the entropy, e.g. with a worker id, so that derived
    families never overlap with the plain ``seed`` family.
    """
    if not 0 <= int(seed) < 2 ** 64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    entropy = [int(seed), *[int(k) for k in key]] if key else int(seed)
    children = np.random.SeedSequence(entropy).spawn(count)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


class UniformStream:
    """Buffered uniform doubles from a generator.

    Drawing in chunks keeps the per-iteration cost low; the sequence of values
    is the same for a given generator state regardless of how it is consumed.
    """

    def __init__(self, generator: np.random.Generator):
        self.generator = generator
        self._buf = np.empty(0)
        self._pos = 0

    def next(self) -> float:
        if self._pos == self._buf.size:
            self._buf = self.generator.random(_BUFFER)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)


class AliasTable:
    """Vose's alias table for a discrete distribution on ``{0, ..., m-1}``.

    One uniform draw ``u`` selects column ``j = floor(u m)``; the fractional
    part ``u m - j`` is the coin deciding between ``j`` and its alias.
    """

    def __init__(self, p):
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)) or p.sum() <= 0:
            raise ParameterError("alias table needs nonnegative finite weights")
        m = p.size
        scaled = p * (m / p.sum())
        prob = np.ones(m)
        alias = np.arange(m)
        small = [i for i in range(m) if scaled[i] < 1.0]
        large = [i for i in range(m) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)
        # leftovers are 1 up to rounding
        for i in small + large:
            prob[i] = 1.0
            alias[i] = i
        self.m = m
        self.prob = prob
        self.alias = alias
        self._prob = prob.tolist()
        self._alias = alias.tolist()

    def draw(self, u: float) -> int:
        t = u * self.m
        j = int(t)
        if j >= self.m:
            j = self.m - 1
        if t - j < self._prob[j]:
            return j
        return self._alias[j]

    def draw_many(self, u: np.ndarray) -> np.ndarray:
        t = np.asarray(u, dtype=float) * self.m
        j = np.minimum(t.astype(np.int64), self.m - 1)
        keep = (t - j) < self.prob[j]
        return np.where(keep, j, self.alias[j])

    def probabilities(self) -> np.ndarray:
        """The distribution encoded by the table (for checking)."""
        out = self.prob / self.m
        np.add.at(out, self.alias, (1.0 - self.prob) / self.m)
        return out


def sample_block(table: AliasTable, stream: UniformStream) -> int:
    """Draw one block index with the table's probabilities."""
    return table.draw(stream.next())
