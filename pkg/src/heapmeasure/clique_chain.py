r"""
The Markov chain of cliques of a Bernoulli measure.

The Cartier-Foata layers C_1, C_2, ... of a random infinite heap form a
homogeneous ergodic Markov chain on the non-empty cliques, with

    initial law   h restricted to the non-empty cliques,
    g(c)        = \sum_{c -> c'} h(c'),
    P[c, c']    = h(c') / g(c)   when c supports c', 0 otherwise.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve

from .errors import ConvergenceError, InvalidMeasureError
from .mobius_measure import BernoulliSpec
from .trace_core import Clique, clique_label, nonempty_cliques, supports

logger = logging.getLogger(__name__)

POWER_TOL = 1e-13
POWER_MAX_ITER = 10**6
STATIONARY_TOL = 1e-10
IDENTITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CliqueChain:
    """
    State space, initial law, normalization vector, transition matrix and
    stationary measure of the chain of cliques. States follow the canonical
    clique order, so matrices are reproducible bit for bit.
    """

    spec: BernoulliSpec
    cliques: Tuple[Clique, ...]
    initial: np.ndarray
    g: np.ndarray
    P: np.ndarray
    pi: np.ndarray

    @property
    def size(self) -> int:
        return len(self.cliques)

    def index(self, clique: Clique) -> int:
        return self.cliques.index(self.spec.ip.canonical(clique))

    def labels(self) -> List[str]:
        return [clique_label(c) for c in self.cliques]


@dataclass(frozen=True)
class IdentityCheck:
    """Rows (clique, h, f*g, holds) of the identity h = f*g on non-empty cliques."""

    rows: Tuple[Tuple[str, float, float, bool], ...]

    @property
    def ok(self) -> bool:
        return all(row[3] for row in self.rows)

    @property
    def violations(self) -> List[str]:
        return [f"h({c}) = {h:.12g} but f*g = {fg:.12g}" for c, h, fg, ok in self.rows if not ok]


def support_matrix(spec: BernoulliSpec) -> np.ndarray:
    """0/1 matrix of the supports relation over the non-empty cliques."""
    ip = spec.ip
    states = nonempty_cliques(ip)
    return np.array(
        [[1.0 if supports(ip, c, d) else 0.0 for d in states] for c in states]
    )


def power_iteration_stationary(
    P: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER
) -> np.ndarray:
    """
    Left-invariant probability vector of a primitive stochastic matrix by
    repeated multiplication from the uniform vector.

    Raises:
        ConvergenceError: After `max_iter` steps without reaching `tol`.
    """
    x = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        y = x @ P
        y /= y.sum()
        if np.max(np.abs(y - x)) < tol:
            return y
        x = y
    raise ConvergenceError("power iteration for the stationary measure", max_iter)


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """
    Solve pi P = pi, sum(pi) = 1 directly; the last equation of (P^T - I) pi = 0
    is replaced by the normalization. Falls back to power iteration when the
    solve fails or returns a vector that is not a stationary probability.
    """
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = solve(A, b)
        if np.all(pi > -STATIONARY_TOL) and np.allclose(pi @ P, pi, atol=STATIONARY_TOL, rtol=0.0):
            pi = np.clip(pi, 0.0, None)
            return pi / pi.sum()
        logger.debug("direct solve returned a non-stationary vector %s", pi)
    except LinAlgError as e:
        logger.debug("direct solve failed: %s", e)
    warnings.warn(
        "Direct solve for the stationary measure failed; using power iteration.",
        UserWarning,
    )
    return power_iteration_stationary(P)


def build_chain(spec: BernoulliSpec) -> CliqueChain:
    """
    Build the Markov chain of cliques of a valid Bernoulli spec.

    Raises:
        InvalidMeasureError: If the spec failed validation.
    """
    if not spec.valid:
        raise InvalidMeasureError(spec.violations)

    states = tuple(nonempty_cliques(spec.ip))
    h = np.array([spec.h[c] for c in states])
    S = support_matrix(spec)
    g = S @ h
    P = S * h[np.newaxis, :] / g[:, np.newaxis]
    initial = h / h.sum()
    pi = stationary_distribution(P)
    logger.debug("built chain over %d cliques, pi = %s", len(states), pi)
    return CliqueChain(spec, states, initial, g, P, pi)


def b_matrix(spec: BernoulliSpec) -> np.ndarray:
    """B[c, c'] = f(c') when c supports c'."""
    states = nonempty_cliques(spec.ip)
    f = np.array([spec.f(c) for c in states])
    return support_matrix(spec) * f[np.newaxis, :]


def b_matrix_spectral_radius(
    spec: BernoulliSpec, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER
) -> float:
    """
    Spectral radius of B by power iteration. B is primitive (every clique
    supports itself), so the iteration converges to the Perron root. A value
    of 1 certifies the weights numerically; invalid weights give other values.

    Raises:
        ConvergenceError: After `max_iter` steps without reaching `tol`.
    """
    B = b_matrix(spec)
    x = np.ones(B.shape[0])
    radius = 0.0
    for _ in range(max_iter):
        y = B @ x
        radius = float(y.max())
        y /= radius
        if np.max(np.abs(y - x)) < tol:
            return radius
        x = y
    raise ConvergenceError("power iteration for the spectral radius of B", max_iter)


def chain_identity_check(chain: CliqueChain, tol: float = IDENTITY_TOL) -> IdentityCheck:
    """Check h(c) = f(c) g(c) on every non-empty clique."""
    spec = chain.spec
    rows = []
    for c, g in zip(chain.cliques, chain.g):
        h = spec.h[c]
        fg = spec.f(c) * float(g)
        rows.append((clique_label(c), h, fg, abs(h - fg) <= tol))
    return IdentityCheck(tuple(rows))
