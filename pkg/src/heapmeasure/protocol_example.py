"""
Two devices running asynchronously and meeting on a synchronizing action.

Each round, device A performs N_a local actions `a` and device B performs N_b
local actions `b`, with N_a and N_b geometric on {0, 1, 2, ...} with
parameters lambda and lambda', then both perform the joint action `c`. The
actions `a` and `b` commute; `c` commutes with nothing. The resulting heap
follows the Bernoulli measure on the monoid T = <a, b, c | ab = ba> with
characteristic numbers (1 - lambda, 1 - lambda', lambda lambda').

This module simulates rounds directly, without the chain of cliques, and
provides the closed forms used to cross-check the general machinery.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .clique_chain import CliqueChain, build_chain
from .errors import InvalidModelError
from .mobius_measure import BernoulliSpec, validate, valuation
from .heap_sampler import DEFAULT_PULL_CAP, HeapStream
from .stopping_times import AstSpec, CylinderCheck, _compare, iterate_ast
from .trace_core import Heap, IndependencePair, Pile, leq, normalize
from .utils import _map_trajectories, _mean_stderr, _trajectory_rng

logger = logging.getLogger(__name__)

PROTOCOL_PIECES = ("a", "b", "c")
PROTOCOL_INDEPENDENT = (("a", "b"),)
# cylinders compared against the valuation in the cross-check
PROTOCOL_CYLINDERS = ("a", "b", "c", "ab", "ca")
CYLINDER_ROUNDS = 3


@dataclass(frozen=True)
class ProtocolParams:
    lam: float
    lam_prime: float

    def __post_init__(self):
        bad = [
            f"{name} = {value!r} is not in (0, 1)"
            for name, value in (("lambda", self.lam), ("lambda'", self.lam_prime))
            if not (isinstance(value, (int, float)) and 0.0 < value < 1.0)
        ]
        if bad:
            raise InvalidModelError(bad)


def protocol_pair() -> IndependencePair:
    return IndependencePair.from_pairs(PROTOCOL_PIECES, PROTOCOL_INDEPENDENT)


def protocol_spec(params: ProtocolParams, ip: Optional[IndependencePair] = None) -> BernoulliSpec:
    """The Bernoulli spec p = (1 - lambda, 1 - lambda', lambda lambda'); h(0) vanishes identically."""
    ip = ip or protocol_pair()
    lam, lam2 = params.lam, params.lam_prime
    return validate(ip, {"a": 1.0 - lam, "b": 1.0 - lam2, "c": lam * lam2})


def protocol_model(params: ProtocolParams) -> Tuple[IndependencePair, BernoulliSpec]:
    ip = protocol_pair()
    return ip, protocol_spec(params, ip)


def geometric(rng: np.random.Generator, lam: float, size: int) -> np.ndarray:
    """
    Draws with P(N = k) = lam (1 - lam)^k by inversion.

    U is taken in (0, 1] so log(U) is always finite.
    """
    u = 1.0 - rng.random(size)
    return np.floor(np.log(u) / math.log1p(-lam)).astype(np.int64)


def round_draws(params: ProtocolParams, rounds: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """(N_a, N_b) for each round."""
    return geometric(rng, params.lam, rounds), geometric(rng, params.lam_prime, rounds)


def round_word(n_a: Sequence[int], n_b: Sequence[int]) -> List[str]:
    """The word a^{N_a} b^{N_b} c, round after round."""
    word: List[str] = []
    for k_a, k_b in zip(n_a, n_b):
        word.extend("a" * int(k_a))
        word.extend("b" * int(k_b))
        word.append("c")
    return word


def simulate_rounds(
    params: ProtocolParams,
    rounds: int,
    seed: int,
    trajectory: int = 0,
    ip: Optional[IndependencePair] = None,
) -> Heap:
    """
    Run `rounds` rounds of the protocol and return the heap of the executed word.

    Raises:
        ValueError: If rounds < 1.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be at least 1, got {rounds}")
    ip = ip or protocol_pair()
    n_a, n_b = round_draws(params, rounds, _trajectory_rng(seed, trajectory))
    return normalize(ip, round_word(n_a, n_b))


def round_density_gamma(params: ProtocolParams) -> Tuple[float, float, float]:
    """Asymptotic densities (gamma_a, gamma_b, gamma_c) of the three actions."""
    lam, lam2 = params.lam, params.lam_prime
    z = lam + lam2 - lam * lam2
    return lam2 * (1.0 - lam) / z, lam * (1.0 - lam2) / z, lam * lam2 / z


def first_hit_a_expectations(params: ProtocolParams) -> Tuple[float, float, float]:
    """
    Expected numbers of b, of c and of all pieces in the smallest sub-heap
    containing an `a`: (E|V'|_b, E|V'|_c, E|V'|).
    """
    lam, lam2 = params.lam, params.lam_prime
    e_b = lam * (1.0 - lam2) / (lam2 * (1.0 - lam))
    e_c = lam / (1.0 - lam)
    return e_b, e_c, 1.0 + e_b + e_c


def round_expectations(params: ProtocolParams) -> Tuple[float, float, float]:
    """(E N_a, E N_b, E N) for one round; a round is the first hit of `c`."""
    lam, lam2 = params.lam, params.lam_prime
    e_a = (1.0 - lam) / lam
    e_b = (1.0 - lam2) / lam2
    return e_a, e_b, 1.0 + e_a + e_b


@dataclass(frozen=True)
class ProtocolCrossCheck:
    """
    Monte-Carlo counterparts of the closed forms: increment means of
    first_hit(a) from the chain of cliques, per-round means and densities
    from the round simulator, and cylinder frequencies of simulated heaps.
    """

    params: ProtocolParams
    first_hit_a: Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]
    round_sizes: Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]
    densities: Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]
    cylinders: Tuple[CylinderCheck, ...]

    def rows(self) -> List[Tuple[str, float, float, float]]:
        """(quantity, estimate, stderr, exact) rows."""
        exact_v = first_hit_a_expectations(self.params)
        exact_r = round_expectations(self.params)
        gamma = round_density_gamma(self.params)
        out = []
        for name, (est, se), exact in zip(("E|V'|_b", "E|V'|_c", "E|V'|"), self.first_hit_a, exact_v):
            out.append((name, est, se, exact))
        for name, (est, se), exact in zip(("E N_a", "E N_b", "E N"), self.round_sizes, exact_r):
            out.append((name, est, se, exact))
        for name, (est, se), exact in zip(("gamma_a", "gamma_b", "gamma_c"), self.densities, gamma):
            out.append((name, est, se, exact))
        for c in self.cylinders:
            se = math.sqrt(c.expected * (1.0 - c.expected) / c.samples) if c.samples else math.nan
            out.append((f"P(>= {c.heap})", c.frequency, se, c.expected))
        return out


def cylinder_frequencies(
    params: ProtocolParams,
    samples: int,
    seed: int,
    cylinders: Sequence[str] = PROTOCOL_CYLINDERS,
    sigma: float = 3.0,
    jobs: Optional[int] = None,
) -> Tuple[CylinderCheck, ...]:
    """
    Frequency of x <= heap over `samples` independent simulated heaps,
    compared with the valuation of x.

    A divisor with k pieces lies in the first k rounds, so short runs of
    CYLINDER_ROUNDS rounds decide every cylinder of up to that many pieces.
    """
    ip, spec = protocol_model(params)
    tests = [normalize(ip, ip.parse_word(w)) for w in cylinders]
    rounds = max(CYLINDER_ROUNDS, max(x.length for x in tests))

    def run(t: int) -> Tuple[bool, ...]:
        heap = simulate_rounds(params, rounds, seed, t, ip)
        return tuple(leq(x, heap) for x in tests)

    rows = _map_trajectories(run, samples, jobs)
    return tuple(
        _compare("rounds", x, sum(1 for r in rows if r[i]), samples, valuation(spec, x), sigma)
        for i, x in enumerate(tests)
    )


def cross_check(
    params: ProtocolParams,
    rounds: int,
    seed: int,
    trajectories: int = 1000,
    jobs: Optional[int] = None,
    pull_cap: int = DEFAULT_PULL_CAP,
) -> ProtocolCrossCheck:
    """
    Run every Monte-Carlo counterpart of the closed forms.

    `rounds` rounds are simulated per trajectory for the round statistics,
    and first_hit(a) is iterated `rounds` times on a stream from the chain
    of cliques for the increment statistics.
    """
    if rounds < 1 or trajectories < 1:
        raise ValueError("rounds and trajectories must both be at least 1")
    ip, spec = protocol_model(params)
    chain: CliqueChain = build_chain(spec)
    ast = AstSpec.first_hit(ip, "a")

    def increments(t: int) -> Tuple[float, float, float]:
        seq = iterate_ast(ast, HeapStream.seeded(chain, seed, t, pull_cap), rounds)
        pile = Pile(ip)
        for delta in seq.increments:
            pile.push_heap(delta)
        k = len(seq)
        counts = pile.counts()
        return counts["b"] / k, counts["c"] / k, pile.length / k

    def round_stats(t: int) -> Tuple[float, float, float, float, float, float]:
        n_a, n_b = round_draws(params, rounds, _trajectory_rng(seed, trajectories + t))
        total = float(n_a.sum() + n_b.sum() + rounds)
        return (
            float(n_a.mean()),
            float(n_b.mean()),
            total / rounds,
            float(n_a.sum()) / total,
            float(n_b.sum()) / total,
            rounds / total,
        )

    inc = _map_trajectories(increments, trajectories, jobs)
    rnd = _map_trajectories(round_stats, trajectories, jobs)
    first_hit_a = tuple(_mean_stderr([r[i] for r in inc]) for i in range(3))
    round_sizes = tuple(_mean_stderr([r[i] for r in rnd]) for i in range(3))
    densities = tuple(_mean_stderr([r[i] for r in rnd]) for i in range(3, 6))
    logger.debug("protocol cross-check for %s done", params)
    cylinders = cylinder_frequencies(params, trajectories, seed + 1, jobs=jobs)
    return ProtocolCrossCheck(params, first_hit_a, round_sizes, densities, cylinders)  # type: ignore[arg-type]
