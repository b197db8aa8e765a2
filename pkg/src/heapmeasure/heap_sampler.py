"""
Seeded random infinite heaps, generated lazily as streams of Cartier-Foata
layers distributed according to a Bernoulli measure.

A `HeapStream` draws cliques from the Markov chain of cliques and piles them
into a buffer. A layer is handed out only once it is final, which is what
makes streams shiftable: a cut taken from the final layers is peeled out of
the buffer, and the remainder keeps growing from the same clique process.
"""

from __future__ import annotations

import logging
from bisect import bisect_right
from typing import List, Optional

import numpy as np

from .clique_chain import CliqueChain
from .errors import PullCapExceededError
from .trace_core import Clique, Heap, Pile
from .utils import _trajectory_rng

logger = logging.getLogger(__name__)

DEFAULT_PULL_CAP = 10**6
UNIFORM_BLOCK = 1024


def _cumulative(row: np.ndarray) -> List[float]:
    # inverse-CDF table; mass after the last reachable state is folded into it
    cum = np.cumsum(row)
    last = int(np.nonzero(row > 0.0)[0][-1])
    cum[last:] = 1.0
    return cum.tolist()


class HeapStream:
    """
    A random infinite heap, materialized on demand.

    `buffer` piles every clique drawn since the last shift. Its bottom
    `len(emitted)` layers are final and cached in `emitted`; a shift peels
    the cut out of the buffer in place. Single owner; not thread safe.
    """

    def __init__(
        self,
        chain: CliqueChain,
        rng: np.random.Generator,
        pull_cap: int = DEFAULT_PULL_CAP,
    ):
        self.chain = chain
        self.ip = chain.spec.ip
        self.pull_cap = pull_cap
        self.pulled = 0
        self.emitted_count = 0
        self.current_state: Optional[int] = None
        self.buffer = Pile(self.ip)
        self.emitted: List[Clique] = []
        self._rng = rng
        self._uniforms: List[float] = []
        self._cum_initial = _cumulative(chain.initial)
        self._cum_rows = [_cumulative(row) for row in chain.P]

    @classmethod
    def seeded(
        cls,
        chain: CliqueChain,
        seed: int,
        trajectory: int = 0,
        pull_cap: int = DEFAULT_PULL_CAP,
    ) -> "HeapStream":
        return cls(chain, _trajectory_rng(seed, trajectory), pull_cap)

    def _uniform(self) -> float:
        if not self._uniforms:
            self._uniforms = self._rng.random(UNIFORM_BLOCK).tolist()
            self._uniforms.reverse()
        return self._uniforms.pop()

    def next_clique(self) -> Clique:
        """Draw the next clique of the underlying chain; never the empty clique."""
        cum = self._cum_initial if self.current_state is None else self._cum_rows[self.current_state]
        state = bisect_right(cum, self._uniform())
        self.current_state = state
        self.pulled += 1
        return self.chain.cliques[state]

    def _collect(self) -> None:
        buffer = self.buffer
        for i in range(len(self.emitted), buffer.final_height()):
            self.emitted.append(buffer.level(i))

    def _grow(self, k: int, context: str) -> None:
        """Pull cliques until at least k bottom layers are final."""
        pulls = 0
        while len(self.emitted) < k:
            if pulls >= self.pull_cap:
                raise PullCapExceededError(self.pull_cap, context)
            self.buffer.extend(self.next_clique())
            pulls += 1
            self._collect()

    def stabilized_layer(self) -> Clique:
        """
        Return the next layer that no future clique can change, pulling
        cliques into the buffer until there is one.

        Raises:
            PullCapExceededError: If more than `pull_cap` cliques are needed.
        """
        layer = self.layer(self.emitted_count)
        self.emitted_count += 1
        return layer

    def layer(self, i: int) -> Clique:
        """The i-th (0-based) stable layer since the last shift."""
        self._grow(i + 1, "stabilizing a layer")
        return self.emitted[i]

    def prefix(self, k: int) -> Heap:
        """The first k layers of the (possibly shifted) heap."""
        if k < 0:
            raise ValueError(f"prefix length must be non-negative, got {k}")
        self._grow(k, "stabilizing a layer")
        return Heap(self.ip, tuple(self.emitted[:k]))

    def materialized(self) -> Heap:
        """Everything generated since the last shift; `emitted` is a prefix of it."""
        return self.buffer.heap()

    def shift(self, cut: Heap) -> "HeapStream":
        """
        Replace the heap by its residual after `cut`; the stream keeps
        drawing from the same clique process.

        Raises:
            NotASubHeapError: If `cut` does not divide the materialized prefix.
        """
        if cut.is_empty():
            return self
        self.buffer.peel(cut)
        self.emitted = []
        self.emitted_count = 0
        self._collect()
        return self


def next_clique(stream: HeapStream) -> Clique:
    return stream.next_clique()


def prefix(stream: HeapStream, k: int) -> Heap:
    return stream.prefix(k)


def shift_stream(stream: HeapStream, cut: Heap) -> HeapStream:
    return stream.shift(cut)


def stabilized_layer(stream: HeapStream) -> Clique:
    return stream.stabilized_layer()
