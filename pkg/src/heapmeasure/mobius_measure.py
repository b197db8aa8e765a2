"""
Valuations, Möbius transforms, Bernoulli-measure validity, the Möbius
polynomial of a heap monoid and the root defining its uniform measure.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import bisect

from .errors import ConvergenceError, InvalidModelError, RootNotFoundError
from .trace_core import Clique, Heap, IndependencePair, Piece, clique_label

logger = logging.getLogger(__name__)

TOL_H = 1e-9
ROOT_TOL = 1e-12
ROOT_MAX_ITER = 200
ROOT_GRID = 4096


@dataclass(frozen=True)
class BernoulliSpec:
    """
    Characteristic numbers p_a of a candidate Bernoulli measure, with the
    Möbius transform h over every clique and the outcome of validation.
    """

    ip: IndependencePair
    p: Mapping[Piece, float]
    h: Mapping[Clique, float]
    valid: bool
    violations: Tuple[str, ...] = ()
    tol: float = field(default=TOL_H, compare=False)

    def f(self, clique: Clique) -> float:
        return math.prod(self.p[a] for a in clique)

    def report(self) -> List[Tuple[str, float, float, bool]]:
        """Rows (clique, f, h, condition met) over every clique, empty clique first."""
        rows = []
        for c in self.ip.cliques:
            value = self.h[c]
            ok = abs(value) <= self.tol if not c else value > self.tol
            rows.append((clique_label(c), self.f(c), value, ok))
        return rows


def valuation(spec: BernoulliSpec, x: Heap) -> float:
    """f(x) = prod_a p_a^{|x|_a}; the probability of the cylinder of x when spec is valid."""
    return math.prod(spec.p[a] for a in x.word())


def mobius_transform(ip: IndependencePair, p: Mapping[Piece, float]) -> Dict[Clique, float]:
    """h(c) = sum over cliques c' containing c of (-1)^{|c'|-|c|} f(c')."""
    f = {c: math.prod(p[a] for a in c) for c in ip.cliques}
    h: Dict[Clique, float] = {}
    for c in ip.cliques:
        members = set(c)
        h[c] = math.fsum(
            (-1) ** (len(sup) - len(c)) * f[sup]
            for sup in ip.cliques
            if members.issubset(sup)
        )
    return h


def validate(ip: IndependencePair, p: Mapping[Piece, float], tol: float = TOL_H) -> BernoulliSpec:
    """
    Check that the weights p define a Bernoulli measure: h(0) = 0 and h > 0 on
    every non-empty clique, both within `tol`.

    Returns:
        BernoulliSpec: with `valid` set and every violated condition listed in
        `violations`.

    Raises:
        InvalidModelError: If a weight is missing, unknown or outside (0, 1),
                           or if the dependence graph is disconnected.
    """
    reasons = []
    if not ip.is_connected:
        reasons.append("the dependence graph is disconnected")
    for a in ip.pieces:
        if a not in p:
            reasons.append(f"missing weight for piece {a!r}")
        elif not (0.0 < float(p[a]) < 1.0):
            reasons.append(f"weight of {a!r} must lie in (0, 1), got {p[a]}")
    for a in p:
        if a not in ip.pieces:
            reasons.append(f"weight given for unknown piece {a!r}")
    if reasons:
        raise InvalidModelError(reasons)

    weights = {a: float(p[a]) for a in ip.pieces}
    h = mobius_transform(ip, weights)
    violations = []
    if abs(h[()]) > tol:
        violations.append(f"h(0) = {h[()]:.12g} is not 0")
    for c in ip.cliques:
        if c and h[c] <= tol:
            violations.append(f"h({clique_label(c)}) = {h[c]:.12g} is not positive")
    if violations:
        logger.debug("weights %s rejected: %s", weights, violations)
    return BernoulliSpec(ip, weights, h, not violations, tuple(violations), tol)


def mobius_polynomial(ip: IndependencePair) -> Polynomial:
    """mu(X) = sum over cliques c of (-1)^{|c|} X^{|c|}."""
    coef = [0] * (ip.max_clique_size + 1)
    for c in ip.cliques:
        coef[len(c)] += (-1) ** len(c)
    return Polynomial(coef)


def uniform_root(ip: IndependencePair) -> float:
    """
    The root of smallest modulus of the Möbius polynomial, which lies in (0, 1).

    mu(0) = 1, so the first sign change on a grid of (0, 1) brackets it;
    bisection then refines the bracket.

    Raises:
        RootNotFoundError: If mu has no sign change on (0, 1).
        ConvergenceError: If bisection does not converge.
    """
    mu = mobius_polynomial(ip)
    grid = np.linspace(0.0, 1.0, ROOT_GRID + 1)
    values = mu(grid)
    hits = np.nonzero(values[1:] <= 0.0)[0]
    if hits.size == 0:
        raise RootNotFoundError(f"mu stays positive, coefficients {mu.coef.tolist()}")
    i = int(hits[0]) + 1
    if values[i] == 0.0:
        return float(grid[i])
    logger.debug("bracketing root of %s in [%g, %g]", mu.coef.tolist(), grid[i - 1], grid[i])
    try:
        root = bisect(mu, grid[i - 1], grid[i], xtol=1e-16, maxiter=ROOT_MAX_ITER)
    except RuntimeError as e:
        raise ConvergenceError("bisection", ROOT_MAX_ITER) from e
    if abs(mu(root)) > ROOT_TOL:
        raise ConvergenceError("bisection", ROOT_MAX_ITER)
    return float(root)


def uniform_spec(ip: IndependencePair) -> BernoulliSpec:
    """The uniform measure P(cylinder of x) = p^{|x|} with p the smallest root of mu."""
    p = uniform_root(ip)
    return validate(ip, {a: p for a in ip.pieces})
