"""
Asynchronous stopping times (ASTs) on random heaps, their shifts and their
iteration.

An AST selects a prefix ("cut") of an infinite heap in a way that can be
decided from a finite prefix. Three built-in ASTs are available:

- first_hit(a): the smallest sub-heap containing an occurrence of a;
- max_clique: the layers up to and including the first maximal clique;
- fixed_prefix(x): x itself when x is a sub-heap, otherwise no finite cut.

ASTs consume a `HeapStream`; `iterate_ast` cuts, shifts the stream by the
cut and repeats, producing increments that are i.i.d. with the law of the AST.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

from .clique_chain import CliqueChain
from .errors import PullCapExceededError
from .formats import AST_FIRST_HIT, AST_MAX_CLIQUE, AST_PREFIX
from .heap_sampler import DEFAULT_PULL_CAP, HeapStream
from .mobius_measure import valuation
from .trace_core import Heap, IndependencePair, Piece, Pile, leq, normalize
from .utils import ProgressCallback, _map_trajectories

logger = logging.getLogger(__name__)

FIRST_HIT = "first_hit"
MAX_CLIQUE = "max_clique"
FIXED_PREFIX = "fixed_prefix"

MIN_CELL_SAMPLES = 30


@dataclass(frozen=True)
class AstSpec:
    kind: str
    piece: Optional[Piece] = None
    heap: Optional[Heap] = None

    @classmethod
    def first_hit(cls, ip: IndependencePair, piece: Piece) -> "AstSpec":
        return cls(FIRST_HIT, piece=ip.check(piece))

    @classmethod
    def max_clique(cls) -> "AstSpec":
        return cls(MAX_CLIQUE)

    @classmethod
    def fixed_prefix(cls, heap: Heap) -> "AstSpec":
        return cls(FIXED_PREFIX, heap=heap)

    @property
    def always_finite(self) -> bool:
        return self.kind != FIXED_PREFIX

    def __str__(self) -> str:
        if self.kind == FIRST_HIT:
            return f"{AST_FIRST_HIT}:{self.piece}"
        if self.kind == MAX_CLIQUE:
            return AST_MAX_CLIQUE
        return f"{AST_PREFIX}:{self.heap}"


def parse_ast(ip: IndependencePair, text: str) -> AstSpec:
    """
    Parse a CLI selector: `first-hit:<piece>`, `max-clique` or `prefix:<word>`.

    Raises:
        ValueError: On an unknown selector.
        UnknownPieceError: On a piece outside the alphabet.
    """
    text = text.strip()
    if text == AST_MAX_CLIQUE:
        return AstSpec.max_clique()
    kind, sep, arg = text.partition(":")
    if sep and kind == AST_FIRST_HIT and arg:
        return AstSpec.first_hit(ip, arg)
    if sep and kind == AST_PREFIX:
        return AstSpec.fixed_prefix(normalize(ip, ip.parse_word(arg)))
    raise ValueError(
        f"Unknown AST selector {text!r}; expected {AST_FIRST_HIT}:<piece>, "
        f"{AST_MAX_CLIQUE} or {AST_PREFIX}:<word>"
    )


@dataclass(frozen=True)
class CutResult:
    """Value of an AST on one stream. `cut` is None for a non-finite outcome."""

    cut: Optional[Heap]
    layers_consumed: int
    pulled: int

    @property
    def finite(self) -> bool:
        return self.cut is not None


@dataclass(frozen=True)
class IncrementSequence:
    """Increments Δ_1, Δ_2, ... of an iterated AST; V_n = Δ_1·...·Δ_n."""

    ip: IndependencePair
    increments: Tuple[Heap, ...]
    complete: bool = True

    def __len__(self) -> int:
        return len(self.increments)

    @cached_property
    def cumulative(self) -> Tuple[Heap, ...]:
        pile = Pile(self.ip)
        out = []
        for delta in self.increments:
            pile.push_heap(delta)
            out.append(pile.heap())
        return tuple(out)

    def V(self, n: int) -> Heap:
        """V_n, with V_0 the empty heap."""
        if n == 0:
            return Heap(self.ip, ())
        return self.cumulative[n - 1]

    def pile(self, n: Optional[int] = None) -> Pile:
        """A pile holding V_n (default: the last iterate); cheaper than `V` for long runs."""
        pile = Pile(self.ip)
        for delta in self.increments[: len(self.increments) if n is None else n]:
            pile.push_heap(delta)
        return pile


def first_hit_cut(heap: Heap, piece: Piece) -> Optional[Heap]:
    """
    The smallest sub-heap of `heap` containing an occurrence of `piece`, or
    None when the piece does not occur.

    This is the downward closure of the lowest occurrence of the piece:
    walking down the layers, an occurrence joins the cut when it depends on a
    piece already in the cut at a higher layer.
    """
    ip = heap.ip
    layers = heap.layers
    k = next((i for i, layer in enumerate(layers) if piece in layer), None)
    if k is None:
        return None
    chosen: List[Tuple[Piece, ...]] = [()] * (k + 1)
    chosen[k] = (piece,)
    above = {piece}
    for j in range(k - 1, -1, -1):
        picked = tuple(b for b in layers[j] if not ip.dependents(b).isdisjoint(above))
        chosen[j] = picked
        above.update(picked)
    # a downward-closed sub-heap keeps its levels
    return Heap(ip, tuple(layer for layer in chosen if layer))


def max_clique_cut(heap: Heap) -> Optional[Heap]:
    """Layers of `heap` up to the first maximal clique, or None when none is maximal."""
    maximal = heap.ip.maximal_cliques
    for i, layer in enumerate(heap.layers):
        if layer in maximal:
            return Heap(heap.ip, heap.layers[: i + 1])
    return None


def apply_ast(spec: AstSpec, stream: HeapStream) -> CutResult:
    """
    Pull stable layers from `stream` until the AST is decided and return its value.

    Raises:
        PullCapExceededError: If the decision needs more than the stream's pull cap.
    """
    start = stream.pulled
    ip = stream.ip

    if spec.kind == FIXED_PREFIX:
        x = spec.heap
        prefix = stream.prefix(x.height)
        cut = x if leq(x, prefix) else None
        return CutResult(cut, x.height, stream.pulled - start)

    k = 0
    while True:
        layer = stream.layer(k)
        k += 1
        if spec.kind == FIRST_HIT:
            if spec.piece in layer:
                cut = first_hit_cut(stream.prefix(k), spec.piece)
                break
        elif layer in ip.maximal_cliques:
            cut = stream.prefix(k)
            break
        if stream.pulled - start > stream.pull_cap:
            raise PullCapExceededError(stream.pull_cap, f"applying {spec}")
    return CutResult(cut, k, stream.pulled - start)


def iterate_ast(spec: AstSpec, stream: HeapStream, n: int) -> IncrementSequence:
    """
    Apply the AST n times, shifting the stream by each cut.

    A non-finite outcome stops the iteration; the partial result has
    `complete` set to False.
    """
    if n < 1:
        raise ValueError(f"iteration count must be at least 1, got {n}")
    increments: List[Heap] = []
    for _ in range(n):
        result = apply_ast(spec, stream)
        if not result.finite:
            logger.debug("%s has no finite value after %d increments", spec, len(increments))
            return IncrementSequence(stream.ip, tuple(increments), complete=False)
        increments.append(result.cut)
        stream.shift(result.cut)
    return IncrementSequence(stream.ip, tuple(increments))


@dataclass(frozen=True)
class CylinderCheck:
    """One comparison of an empirical cylinder frequency with its valuation."""

    condition: str
    heap: str
    samples: int
    frequency: float
    expected: float
    z: float
    ok: bool


@dataclass(frozen=True)
class StrongBernoulliReport:
    ast: AstSpec
    trials: int
    checks: Tuple[CylinderCheck, ...]
    skipped: Tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)


def _compare(condition: str, y: Heap, hits: int, samples: int, expected: float, sigma: float) -> CylinderCheck:
    if samples == 0:
        return CylinderCheck(condition, str(y), 0, math.nan, expected, math.nan, False)
    freq = hits / samples
    if expected in (0.0, 1.0):
        z = 0.0 if freq == expected else math.inf
    else:
        z = (freq - expected) / math.sqrt(expected * (1.0 - expected) / samples)
    return CylinderCheck(condition, str(y), samples, freq, expected, z, abs(z) <= sigma)


def _default_test_heaps(ip: IndependencePair) -> List[Heap]:
    heaps = [normalize(ip, [a]) for a in ip.pieces]
    heaps += [normalize(ip, c) for c in ip.cliques if len(c) > 1]
    return heaps


def strong_bernoulli_check(
    spec: AstSpec,
    chain: CliqueChain,
    trials: int,
    seed: int,
    tests: Optional[Sequence[Heap]] = None,
    cells: int = 3,
    sigma: float = 3.0,
    min_cell: int = MIN_CELL_SAMPLES,
    jobs: Optional[int] = None,
    pull_cap: int = DEFAULT_PULL_CAP,
) -> StrongBernoulliReport:
    """
    Statistical check that the heap left after an AST cut is again
    distributed by the Bernoulli measure, independently of the cut.

    For each test heap y, P(y ≤ shifted heap) is estimated unconditionally and
    conditionally on the `cells` most frequent cut values, and each estimate
    is compared with f(y) at `sigma` standard errors. Conditioning cells
    with fewer than `min_cell` samples are skipped and listed.
    """
    bernoulli = chain.spec
    tests = list(tests) if tests is not None else _default_test_heaps(bernoulli.ip)

    def trial(t: int) -> Optional[Tuple[Heap, Tuple[bool, ...]]]:
        stream = HeapStream.seeded(chain, seed, t, pull_cap)
        result = apply_ast(spec, stream)
        if not result.finite:
            return None
        stream.shift(result.cut)
        return result.cut, tuple(leq(y, stream.prefix(y.height)) for y in tests)

    outcomes = [o for o in _map_trajectories(trial, trials, jobs) if o is not None]

    checks: List[CylinderCheck] = []
    skipped: List[str] = []
    for i, y in enumerate(tests):
        hits = sum(1 for _, flags in outcomes if flags[i])
        checks.append(_compare("unconditional", y, hits, len(outcomes), valuation(bernoulli, y), sigma))

    by_cut: Dict[Heap, List[Tuple[bool, ...]]] = defaultdict(list)
    for cut, flags in outcomes:
        by_cut[cut].append(flags)
    ranked = sorted(by_cut, key=lambda c: (-len(by_cut[c]), c.length, str(c)))
    for cut in ranked[:cells]:
        rows = by_cut[cut]
        if len(rows) < min_cell:
            skipped.append(f"cut = {cut}: {len(rows)} samples")
            continue
        for i, y in enumerate(tests):
            hits = sum(1 for flags in rows if flags[i])
            checks.append(_compare(f"cut = {cut}", y, hits, len(rows), valuation(bernoulli, y), sigma))
    return StrongBernoulliReport(spec, trials, tuple(checks), tuple(skipped))


@dataclass(frozen=True)
class ExhaustivenessReport:
    """
    For every trajectory, the number of iterations after which V_n covered
    each of the first `depth` layers of the heap (None when never covered).
    """

    ast: AstSpec
    depth: int
    needed: Tuple[Tuple[Optional[int], ...], ...]
    failures: int

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def max_needed(self) -> Optional[int]:
        values = [n for row in self.needed for n in row if n is not None]
        return max(values) if values else None

    def mean_needed(self, k: Optional[int] = None) -> float:
        """Mean iterations needed to cover the first k layers (default: depth)."""
        k = self.depth if k is None else k
        values = [row[k - 1] for row in self.needed if row[k - 1] is not None]
        return sum(values) / len(values) if values else math.nan


def exhaustiveness_check(
    spec: AstSpec,
    chain: CliqueChain,
    trajectories: int,
    depth: int,
    seed: int,
    max_iterations: int = 1000,
    jobs: Optional[int] = None,
    pull_cap: int = DEFAULT_PULL_CAP,
    progress: Optional[ProgressCallback] = None,
) -> ExhaustivenessReport:
    """
    Empirical evidence that iterated cuts exhaust the heap: for k up to
    `depth`, find the first n with prefix(k) ≤ V_n. A trajectory fails when
    the AST has no finite value or `max_iterations` is reached first.
    """
    ip = chain.spec.ip

    def run(t: int) -> Tuple[Optional[int], ...]:
        stream = HeapStream.seeded(chain, seed, t, pull_cap)
        top = stream.prefix(depth)
        targets = [Heap(ip, top.layers[:k]) for k in range(1, depth + 1)]
        needed: List[Optional[int]] = [None] * depth
        pile = Pile(ip)
        for n in range(1, max_iterations + 1):
            result = apply_ast(spec, stream)
            if not result.finite:
                break
            pile.push_heap(result.cut)
            stream.shift(result.cut)
            current = pile.heap()
            for k, target in enumerate(targets):
                if needed[k] is None and leq(target, current):
                    needed[k] = n
            if all(v is not None for v in needed):
                break
        return tuple(needed)

    rows = _map_trajectories(run, trajectories, jobs, progress)
    failures = sum(1 for row in rows if any(v is None for v in row))
    if failures:
        logger.info("%s: %d of %d trajectories not exhausted", spec, failures, trajectories)
    return ExhaustivenessReport(spec, depth, tuple(rows), failures)
