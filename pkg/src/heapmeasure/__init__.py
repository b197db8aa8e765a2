"""
Top-level package for heapmeasure: Bernoulli measures on heap monoids,
their chains of cliques, asynchronous stopping times and ergodic estimates.
"""

from __future__ import annotations

__version__ = "1.0.0"

# Public API exports
from .trace_core import IndependencePair, Heap, Pile, normalize, concat, residual, leq, meet, join
from .mobius_measure import BernoulliSpec, validate, valuation, mobius_polynomial, uniform_root, uniform_spec
from .clique_chain import CliqueChain, build_chain, b_matrix_spectral_radius
from .heap_sampler import HeapStream
from .stopping_times import AstSpec, apply_ast, iterate_ast, parse_ast
from .ergodic_estimator import CostFunction, ErgodicReport, ergodic_mean, exact_limit, speedup, subadditive_ratio, density_vector
from .protocol_example import ProtocolParams, simulate_rounds, protocol_spec, protocol_model
from .io import parse_model
from .errors import HeapMeasureError

__all__ = [
    "IndependencePair",
    "Heap",
    "Pile",
    "normalize",
    "concat",
    "residual",
    "leq",
    "meet",
    "join",
    "BernoulliSpec",
    "validate",
    "valuation",
    "mobius_polynomial",
    "uniform_root",
    "uniform_spec",
    "CliqueChain",
    "build_chain",
    "b_matrix_spectral_radius",
    "HeapStream",
    "AstSpec",
    "apply_ast",
    "iterate_ast",
    "parse_ast",
    "CostFunction",
    "ErgodicReport",
    "ergodic_mean",
    "exact_limit",
    "speedup",
    "subadditive_ratio",
    "density_vector",
    "ProtocolParams",
    "simulate_rounds",
    "protocol_spec",
    "protocol_model",
    "parse_model",
    "HeapMeasureError",
    "__version__",
]
