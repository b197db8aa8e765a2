import math
import time

import numpy as np
import pytest
from pytest import approx

from heapmeasure.errors import UnknownPieceError
from heapmeasure.ergodic_estimator import (
    CostFunction,
    ErgodicReport,
    density_vector,
    ergodic_mean,
    exact_limit,
    speedup,
    subadditive_ratio,
)
from heapmeasure.formats import ERGODIC_HEADER
from heapmeasure.heap_sampler import HeapStream
from heapmeasure.protocol_example import ProtocolParams, protocol_spec, round_density_gamma
from heapmeasure.clique_chain import build_chain
from heapmeasure.stopping_times import AstSpec, iterate_ast
from heapmeasure.trace_core import height, normalize

SQRT5 = math.sqrt(5)
RHO_UNIFORM = 5 * (7 - SQRT5) / 22


class TestCostFunction:
    def test_parse(self, T):
        phi = CostFunction.parse(T, "a=1, c=0.5")
        assert phi.values == {"a": 1.0, "b": 0.0, "c": 0.5}
        assert str(phi) == "a=1,c=0.5"

    def test_parse_errors(self, T):
        with pytest.raises(ValueError):
            CostFunction.parse(T, "a")
        with pytest.raises(ValueError):
            CostFunction.parse(T, "a=x")
        with pytest.raises(UnknownPieceError):
            CostFunction.parse(T, "z=1")

    def test_additive(self, T):
        phi = CostFunction.parse(T, "a=2,b=-1,c=0.25")
        x, y = normalize(T, "acab"), normalize(T, "cbb")
        assert phi(x * y) == approx(phi(x) + phi(y))
        assert phi(x) == approx(2 * 2 - 1 + 0.25)

    def test_ones_is_length(self, T):
        x = normalize(T, "abcabcc")
        assert CostFunction.ones(T)(x) == x.length
        assert CostFunction.ones(T).of_counts({"a": 2, "c": 1}) == 3


class TestExactLimits:
    def test_uniform_densities(self, uniform_T_chain):
        d = density_vector(uniform_T_chain)
        assert d["a"] == approx((5 - SQRT5) / 10, abs=1e-10)
        assert d["b"] == approx((5 - SQRT5) / 10, abs=1e-10)
        assert d["c"] == approx(1 / SQRT5, abs=1e-10)
        assert sum(d.values()) == approx(1.0, abs=1e-12)

    def test_protocol_densities(self, T):
        rng = np.random.default_rng(4)
        for lam, lam2 in rng.uniform(0.05, 0.95, size=(20, 2)):
            params = ProtocolParams(float(lam), float(lam2))
            d = density_vector(build_chain(protocol_spec(params, T)))
            assert [d["a"], d["b"], d["c"]] == approx(list(round_density_gamma(params)), abs=1e-10)
            assert sum(d.values()) == approx(1.0, abs=1e-12)

    def test_ones_and_linearity(self, T, uniform_T_chain):
        assert exact_limit(uniform_T_chain, CostFunction.ones(T)) == approx(1.0, abs=1e-15)
        rng = np.random.default_rng(8)
        for _ in range(10):
            u, v = rng.normal(size=3), rng.normal(size=3)
            phi = CostFunction(dict(zip("abc", u)))
            psi = CostFunction(dict(zip("abc", v)))
            both = CostFunction(dict(zip("abc", 2 * u - v)))
            assert exact_limit(uniform_T_chain, both) == approx(
                2 * exact_limit(uniform_T_chain, phi) - exact_limit(uniform_T_chain, psi), abs=1e-12
            )

    def test_speedup(self, uniform_T_chain, protocol_T_chain, free2_chain):
        assert speedup(uniform_T_chain) == approx(RHO_UNIFORM, abs=1e-9)
        assert speedup(protocol_T_chain) == approx(1.125, abs=1e-12)
        assert speedup(free2_chain) == approx(1.0, abs=1e-12)

    def test_speedup_bounds(self, path4):
        from heapmeasure.mobius_measure import uniform_spec

        rho = speedup(build_chain(uniform_spec(path4)))
        assert 1.0 <= rho <= path4.max_clique_size


class TestErgodicMean:
    def test_ones_is_exactly_one(self, T, uniform_T_chain):
        report = ergodic_mean(AstSpec.first_hit(T, "a"), uniform_T_chain, CostFunction.ones(T), n=20, trajectories=20, seed=1)
        assert report.estimate == approx(1.0)
        assert report.stderr == approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("selector", [("first_hit", "a"), ("first_hit", "c"), ("max_clique", None)])
    def test_cut_invariance_uniform(self, T, uniform_T_chain, selector):
        kind, piece = selector
        ast = AstSpec.first_hit(T, piece) if kind == "first_hit" else AstSpec.max_clique()
        report = ergodic_mean(ast, uniform_T_chain, CostFunction.indicator(T, "c"), n=200, trajectories=200, seed=101)
        assert report.exact == approx(1 / SQRT5, abs=1e-10)
        assert report.within(3.0), (report.estimate, report.stderr)
        assert report.incomplete == 0

    @pytest.mark.slow
    def test_cut_invariance_full_scale(self, T, uniform_T_chain):
        phi = CostFunction.indicator(T, "c")
        start = time.perf_counter()
        for ast in (AstSpec.first_hit(T, "a"), AstSpec.first_hit(T, "c"), AstSpec.max_clique()):
            report = ergodic_mean(ast, uniform_T_chain, phi, n=1000, trajectories=1000, seed=101)
            assert report.within(3.0), (str(ast), report.estimate, report.stderr)
        assert time.perf_counter() - start < 60.0

    @pytest.mark.parametrize("piece", ["a", "c"])
    def test_protocol_density_of_c(self, T, protocol_T_chain, piece):
        report = ergodic_mean(
            AstSpec.first_hit(T, piece), protocol_T_chain, CostFunction.indicator(T, "c"),
            n=200, trajectories=200, seed=102,
        )
        assert report.exact == approx(1 / 3, abs=1e-12)
        assert report.within(3.0), (report.estimate, report.stderr)

    def test_deterministic_across_jobs(self, T, uniform_T_chain):
        args = (AstSpec.max_clique(), uniform_T_chain, CostFunction.indicator(T, "a"))
        one = ergodic_mean(*args, n=30, trajectories=16, seed=5, jobs=1)
        many = ergodic_mean(*args, n=30, trajectories=16, seed=5, jobs=4)
        assert one == many

    def test_fixed_prefix_warns(self, T, uniform_T_chain):
        ast = AstSpec.fixed_prefix(normalize(T, "c"))
        with pytest.warns(UserWarning, match="not exhaustive"):
            report = ergodic_mean(ast, uniform_T_chain, CostFunction.ones(T), n=50, trajectories=10, seed=6)
        assert report.incomplete == 10

    def test_bad_arguments(self, T, uniform_T_chain):
        with pytest.raises(ValueError):
            ergodic_mean(AstSpec.max_clique(), uniform_T_chain, CostFunction.ones(T), n=0, trajectories=1)

    def test_rows(self, T, uniform_T_chain):
        report = ergodic_mean(AstSpec.first_hit(T, "a"), uniform_T_chain, CostFunction.indicator(T, "c"), n=10, trajectories=5, seed=9)
        rows = report.rows()
        assert ErgodicReport.header() == ERGODIC_HEADER
        assert len(rows) == 2
        assert all(len(r) == len(ERGODIC_HEADER) for r in rows)
        assert [r[5] for r in rows] == ["5", "10"]
        assert rows[1][:2] == ("mean[c=1]", "first-hit:a")
        assert rows[1][2] == format(report.estimate, ".12g")


class TestSubadditiveRatio:
    def test_height_ratio_uniform(self, T, uniform_T_chain):
        report = subadditive_ratio(AstSpec.first_hit(T, "a"), uniform_T_chain, n=200, trajectories=200, seed=201)
        assert report.exact == approx(1 / RHO_UNIFORM, abs=1e-9)
        assert report.within(3.0), (report.estimate, report.stderr)

    def test_invariance_across_pieces(self, T, uniform_T_chain):
        a = subadditive_ratio(AstSpec.first_hit(T, "a"), uniform_T_chain, n=200, trajectories=200, seed=202)
        c = subadditive_ratio(AstSpec.first_hit(T, "c"), uniform_T_chain, n=200, trajectories=200, seed=203)
        assert abs(a.estimate - c.estimate) <= 3 * math.hypot(a.stderr, c.stderr)

    def test_max_clique(self, protocol_T_chain):
        report = subadditive_ratio(AstSpec.max_clique(), protocol_T_chain, n=200, trajectories=200, seed=204)
        assert report.exact == approx(1 / 1.125)
        assert report.within(3.0), (report.estimate, report.stderr)

    def test_free_monoid_ratio_is_one(self, free2, free2_chain):
        report = subadditive_ratio(AstSpec.first_hit(free2, "a"), free2_chain, n=30, trajectories=10, seed=7)
        assert report.estimate == approx(1.0)

    def test_custom_function(self, T, uniform_T_chain):
        report = subadditive_ratio(AstSpec.first_hit(T, "a"), uniform_T_chain, n=50, trajectories=20, seed=8, func=height)
        assert report.exact is None
        assert report.quantity == "ratio[height]"
        assert 0 < report.estimate <= 1

    def test_non_subadditive_function_warns(self, T, uniform_T_chain):
        def squared_length(x):
            return float(x.length ** 2)

        with pytest.warns(UserWarning, match="not sub-additive"):
            subadditive_ratio(AstSpec.first_hit(T, "a"), uniform_T_chain, n=5, trajectories=2, seed=9, func=squared_length)

    def test_fixed_prefix_rejected(self, T, uniform_T_chain):
        with pytest.raises(ValueError):
            subadditive_ratio(AstSpec.fixed_prefix(normalize(T, "a")), uniform_T_chain, n=5, trajectories=2)

    def test_pile_height_matches_heap(self, T, uniform_T_chain):
        seq = iterate_ast(AstSpec.first_hit(T, "a"), HeapStream.seeded(uniform_T_chain, 10), 40)
        assert seq.pile().height == height(seq.V(40))
