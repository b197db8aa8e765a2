"""
Ergodic means of additive cost functions along iterated ASTs, their exact
limits from the stationary measure of the chain of cliques, sub-additive
ratios (the height) and the speedup.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .clique_chain import CliqueChain
from .formats import ERGODIC_HEADER
from .heap_sampler import DEFAULT_PULL_CAP, HeapStream
from .stopping_times import FIXED_PREFIX, AstSpec, iterate_ast
from .trace_core import Clique, Heap, IndependencePair, Piece, Pile, concat
from .utils import ProgressCallback, _format_float, _map_trajectories, _mean_stderr, _trajectory_rng

logger = logging.getLogger(__name__)

DEFAULT_ITERATIONS = 1000
DEFAULT_TRAJECTORIES = 1000
SUBADDITIVE_SPOT_CHECKS = 50
# stream index reserved for the spot check, disjoint from trajectory indices
SPOT_CHECK_STREAM = 2**32 - 1


@dataclass(frozen=True)
class CostFunction:
    """A cost per piece, extended additively to heaps: <phi, x> = sum_a phi(a) |x|_a."""

    values: Mapping[Piece, float]

    @classmethod
    def from_mapping(cls, ip: IndependencePair, values: Mapping[Piece, float]) -> "CostFunction":
        for a in values:
            ip.check(a)
        return cls({a: float(values.get(a, 0.0)) for a in ip.pieces})

    @classmethod
    def ones(cls, ip: IndependencePair) -> "CostFunction":
        return cls({a: 1.0 for a in ip.pieces})

    @classmethod
    def indicator(cls, ip: IndependencePair, piece: Piece) -> "CostFunction":
        return cls.from_mapping(ip, {piece: 1.0})

    @classmethod
    def parse(cls, ip: IndependencePair, text: str) -> "CostFunction":
        """
        Parse `a=1,c=0.5`; pieces not mentioned cost 0.

        Raises:
            ValueError: On malformed entries.
            UnknownPieceError: On a piece outside the alphabet.
        """
        values: Dict[Piece, float] = {}
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            piece, sep, number = item.partition("=")
            if not sep:
                raise ValueError(f"cost entry {item!r} is not of the form <piece>=<real>")
            try:
                values[piece.strip()] = float(number)
            except ValueError:
                raise ValueError(f"cost entry {item!r} has a non-numeric value") from None
        return cls.from_mapping(ip, values)

    def of_counts(self, counts: Mapping[Piece, int]) -> float:
        return math.fsum(self.values[a] * n for a, n in counts.items())

    def of_clique(self, clique: Clique) -> float:
        return math.fsum(self.values[a] for a in clique)

    def __call__(self, x: Heap) -> float:
        return math.fsum(self.values[a] for layer in x.layers for a in layer)

    def __str__(self) -> str:
        return ",".join(f"{a}={v:g}" for a, v in self.values.items() if v)


@dataclass(frozen=True)
class ErgodicReport:
    """
    Across-trajectory mean and standard error of a ratio evaluated at the
    final iterate V_n, with the same ratio at V_{n/2} for the stabilization
    check, and the exact limit when it is known.
    """

    quantity: str
    ast: AstSpec
    n_iterations: int
    n_trajectories: int
    seed: int
    estimate: float
    stderr: float
    exact: Optional[float]
    half_estimate: float
    half_stderr: float
    incomplete: int = 0

    def within(self, sigma: float = 3.0) -> bool:
        """True when the estimate lies within `sigma` standard errors of the exact limit."""
        if self.exact is None:
            return True
        return abs(self.estimate - self.exact) <= sigma * self.stderr + 1e-12

    def rows(self) -> List[Tuple[str, ...]]:
        common = (str(self.ast),)
        tail = (str(self.n_trajectories), str(self.seed))
        exact = _format_float(self.exact)
        return [
            (self.quantity, *common, _format_float(self.half_estimate),
             _format_float(self.half_stderr), exact, str(max(1, self.n_iterations // 2)), *tail),
            (self.quantity, *common, _format_float(self.estimate),
             _format_float(self.stderr), exact, str(self.n_iterations), *tail),
        ]

    @staticmethod
    def header() -> Tuple[str, ...]:
        return ERGODIC_HEADER


def exact_limit(chain: CliqueChain, phi: CostFunction) -> float:
    """M phi = sum_c pi(c) <phi, c> / sum_c pi(c) |c|."""
    pi = chain.pi
    num = float(np.dot(pi, [phi.of_clique(c) for c in chain.cliques]))
    return num / speedup(chain)


def speedup(chain: CliqueChain) -> float:
    """rho = sum_c pi(c) |c|: the asymptotic number of pieces per layer."""
    return float(np.dot(chain.pi, [len(c) for c in chain.cliques]))


def density_vector(chain: CliqueChain) -> Dict[Piece, float]:
    """Asymptotic density of each piece."""
    ip = chain.spec.ip
    return {a: exact_limit(chain, CostFunction.indicator(ip, a)) for a in ip.pieces}


def _summarize(
    quantity: str,
    ast: AstSpec,
    n: int,
    trajectories: int,
    seed: int,
    results: List[Optional[Tuple[float, float]]],
    exact: Optional[float],
) -> ErgodicReport:
    finished = [r for r in results if r is not None]
    incomplete = len(results) - len(finished)
    if incomplete:
        logger.warning("%d of %d trajectories of %s stopped early", incomplete, trajectories, ast)
    half, half_se = _mean_stderr([r[0] for r in finished])
    mean, se = _mean_stderr([r[1] for r in finished])
    return ErgodicReport(quantity, ast, n, trajectories, seed, mean, se, exact, half, half_se, incomplete)


def _check_exhaustive(ast: AstSpec) -> None:
    if ast.kind == FIXED_PREFIX:
        warnings.warn(
            f"{ast} is not exhaustive; its ergodic means have no cut-invariant limit.",
            UserWarning,
        )


def ergodic_mean(
    ast: AstSpec,
    chain: CliqueChain,
    phi: CostFunction,
    n: int = DEFAULT_ITERATIONS,
    trajectories: int = DEFAULT_TRAJECTORIES,
    seed: int = 0,
    jobs: Optional[int] = None,
    pull_cap: int = DEFAULT_PULL_CAP,
    progress: Optional[ProgressCallback] = None,
) -> ErgodicReport:
    """
    Estimate the ergodic mean <phi, V_n> / |V_n| over independent trajectories.

    Each trajectory iterates the AST n times on its own seeded stream; the
    report carries the mean and standard error across trajectories and the
    exact limit from the stationary measure.
    """
    if n < 1 or trajectories < 1:
        raise ValueError("iterations and trajectories must both be at least 1")
    _check_exhaustive(ast)
    half_n = max(1, n // 2)

    def run(t: int) -> Optional[Tuple[float, float]]:
        stream = HeapStream.seeded(chain, seed, t, pull_cap)
        seq = iterate_ast(ast, stream, n)
        if not seq.complete:
            return None
        cost = length = 0.0
        half = math.nan
        for i, delta in enumerate(seq.increments, start=1):
            cost += phi(delta)
            length += delta.length
            if i == half_n:
                half = cost / length if length else math.nan
        if not length:
            return None
        return half, cost / length

    results = _map_trajectories(run, trajectories, jobs, progress)
    return _summarize(f"mean[{phi}]", ast, n, trajectories, seed, results, exact_limit(chain, phi))


def _spot_check_subadditive(func: Callable[[Heap], float], chain: CliqueChain, ast: AstSpec, seed: int) -> None:
    stream = HeapStream.seeded(chain, seed, 0)
    seq = iterate_ast(ast, stream, 8)
    pool = list(seq.increments) + list(seq.cumulative)
    rng = _trajectory_rng(seed, SPOT_CHECK_STREAM)
    for _ in range(SUBADDITIVE_SPOT_CHECKS):
        x = pool[int(rng.integers(len(pool)))]
        y = pool[int(rng.integers(len(pool)))]
        if func(concat(x, y)) > func(x) + func(y) + 1e-12:
            warnings.warn(
                f"cost function is not sub-additive on ({x}, {y}); the ratio may not converge.",
                UserWarning,
            )
            return


def subadditive_ratio(
    ast: AstSpec,
    chain: CliqueChain,
    n: int = DEFAULT_ITERATIONS,
    trajectories: int = DEFAULT_TRAJECTORIES,
    seed: int = 0,
    func: Optional[Callable[[Heap], float]] = None,
    jobs: Optional[int] = None,
    pull_cap: int = DEFAULT_PULL_CAP,
    progress: Optional[ProgressCallback] = None,
) -> ErgodicReport:
    """
    Estimate phi(V_n) / |V_n| for a sub-additive phi, the height by default.

    For the height the limit is 1 / speedup, reported as the exact value;
    custom functions carry no exact value and are spot-checked for
    sub-additivity (a warning, not an error).
    """
    if ast.kind == FIXED_PREFIX:
        raise ValueError("sub-additive ratios need an exhaustive AST (first-hit or max-clique)")
    if n < 1 or trajectories < 1:
        raise ValueError("iterations and trajectories must both be at least 1")
    if func is not None:
        _spot_check_subadditive(func, chain, ast, seed)
    half_n = max(1, n // 2)

    def ratio(pile: Pile) -> float:
        if func is None:
            return pile.height / pile.length
        return func(pile.heap()) / pile.length

    def run(t: int) -> Optional[Tuple[float, float]]:
        stream = HeapStream.seeded(chain, seed, t, pull_cap)
        seq = iterate_ast(ast, stream, n)
        pile = Pile(stream.ip)
        half = None
        for i, delta in enumerate(seq.increments, start=1):
            pile.push_heap(delta)
            if i == half_n:
                half = ratio(pile)
        whole = ratio(pile)
        return (whole if half is None else half), whole

    results = _map_trajectories(run, trajectories, jobs, progress)
    name = "height_ratio" if func is None else f"ratio[{getattr(func, '__name__', 'func')}]"
    exact = 1.0 / speedup(chain) if func is None else None
    return _summarize(name, ast, n, trajectories, seed, results, exact)
