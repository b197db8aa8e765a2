import math

import numpy as np
import pytest
from pytest import approx

from heapmeasure.clique_chain import (
    b_matrix_spectral_radius,
    build_chain,
    chain_identity_check,
    power_iteration_stationary,
    stationary_distribution,
    support_matrix,
)
from heapmeasure.errors import InvalidMeasureError
from heapmeasure.heap_sampler import HeapStream
from heapmeasure.mobius_measure import validate
from heapmeasure.protocol_example import ProtocolParams, protocol_spec
from heapmeasure.trace_core import supports


def _protocol_P(lam, lam2):
    # states a, b, c, a·b
    common = [lam2 * (1 - lam), lam * (1 - lam2), lam * lam2, (1 - lam) * (1 - lam2)]
    return np.array([
        [1 - lam, 0.0, lam, 0.0],
        [0.0, 1 - lam2, lam2, 0.0],
        common,
        common,
    ])


def _protocol_pi(lam, lam2):
    z = lam ** 2 + lam2 ** 2 - lam * lam2 * (lam + lam2 - 1)
    return np.array([
        (1 - lam) * lam2 ** 2,
        (1 - lam2) * lam ** 2,
        lam * lam2 * (lam + lam2 - lam * lam2),
        lam * lam2 * (1 - lam) * (1 - lam2),
    ]) / z


@pytest.fixture(scope="module")
def random_params():
    rng = np.random.default_rng(3)
    return [ProtocolParams(float(a), float(b)) for a, b in rng.uniform(0.05, 0.95, size=(10, 2))]


class TestBuildChain:
    def test_states_follow_clique_order(self, protocol_T_chain):
        assert protocol_T_chain.labels() == ["a", "b", "c", "a·b"]

    def test_protocol_matrix(self, T, random_params):
        for params in random_params:
            chain = build_chain(protocol_spec(params, T))
            np.testing.assert_allclose(chain.P, _protocol_P(params.lam, params.lam_prime), atol=1e-12, rtol=0)
            np.testing.assert_allclose(chain.pi, _protocol_pi(params.lam, params.lam_prime), atol=1e-10, rtol=0)
            np.testing.assert_allclose(chain.P.sum(axis=1), 1.0, atol=1e-12)
            np.testing.assert_allclose(chain.pi @ chain.P, chain.pi, atol=1e-10)

    def test_protocol_half(self, protocol_T_chain):
        assert protocol_T_chain.pi.tolist() == approx([0.25, 0.25, 0.375, 0.125], abs=1e-12)

    def test_uniform_pi(self, uniform_T, uniform_T_chain):
        p = uniform_T.p["a"]
        expected = np.array([p, p, 2 - 3 * p, 3 * p - 1]) / (2 * p + 1)
        np.testing.assert_allclose(uniform_T_chain.pi, expected, atol=1e-10)

    def test_initial_law(self, uniform_T_chain, protocol_T_chain):
        for chain in (uniform_T_chain, protocol_T_chain):
            assert chain.initial.sum() == approx(1.0, abs=1e-12)
            h = np.array([chain.spec.h[c] for c in chain.cliques])
            assert h.sum() == approx(1.0, abs=1e-9)
            assert np.all(chain.pi > 0)

    def test_zero_pattern_is_support_relation(self, uniform_T_chain):
        ip = uniform_T_chain.spec.ip
        for i, c in enumerate(uniform_T_chain.cliques):
            for j, d in enumerate(uniform_T_chain.cliques):
                assert (uniform_T_chain.P[i, j] > 0) == supports(ip, c, d)

    def test_support_matrix_has_self_loops(self, uniform_T):
        assert np.all(np.diag(support_matrix(uniform_T)) == 1.0)

    def test_invalid_spec(self, T):
        with pytest.raises(InvalidMeasureError):
            build_chain(validate(T, {a: 0.5 for a in T.pieces}))

    def test_free_monoid_is_iid(self, free2_chain):
        np.testing.assert_allclose(free2_chain.P, [[0.3, 0.7], [0.3, 0.7]], atol=1e-12)
        np.testing.assert_allclose(free2_chain.pi, [0.3, 0.7], atol=1e-12)


class TestStationary:
    def test_power_iteration_agrees(self, uniform_T_chain, protocol_T_chain):
        for chain in (uniform_T_chain, protocol_T_chain):
            np.testing.assert_allclose(power_iteration_stationary(chain.P), chain.pi, atol=1e-8)

    def test_fallback_on_singular_system(self):
        # two closed classes: the direct system is singular
        P = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.warns(UserWarning, match="power iteration"):
            pi = stationary_distribution(P)
        assert pi.sum() == approx(1.0)

    def test_empirical_state_frequencies(self, protocol_T_chain):
        stream = HeapStream.seeded(protocol_T_chain, seed=2024)
        batches, size = 100, 1000
        means = np.zeros((batches, protocol_T_chain.size))
        for k in range(batches):
            for _ in range(size):
                stream.next_clique()
                means[k, stream.current_state] += 1.0
        means /= size
        estimate = means.mean(axis=0)
        stderr = means.std(axis=0, ddof=1) / math.sqrt(batches)
        assert np.all(np.abs(estimate - protocol_T_chain.pi) <= 4 * stderr)


class TestSpectralRadius:
    def test_uniform(self, uniform_T):
        assert b_matrix_spectral_radius(uniform_T) == approx(1.0, abs=1e-8)

    def test_protocol(self, T, random_params):
        for params in [ProtocolParams(0.3, 0.6)] + random_params[:3]:
            assert b_matrix_spectral_radius(protocol_spec(params, T)) == approx(1.0, abs=1e-8)

    def test_invalid_weights_exceed_one(self, T):
        assert b_matrix_spectral_radius(validate(T, {a: 0.5 for a in T.pieces})) > 1.0


class TestIdentityCheck:
    def test_uniform(self, uniform_T_chain):
        check = chain_identity_check(uniform_T_chain)
        assert check.ok
        assert len(check.rows) == 4

    def test_protocol(self, T, random_params):
        for params in random_params:
            assert chain_identity_check(build_chain(protocol_spec(params, T))).ok

    def test_free_monoid(self, free2_chain):
        check = chain_identity_check(free2_chain)
        assert check.ok
        assert free2_chain.g.tolist() == approx([1.0, 1.0])
