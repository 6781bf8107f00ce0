"""Exact generator, uniformization and the two bound checkers."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from ipsim.dynamics.rules import Contact, DegradationLadder, IndependentFlip, StateAlphabet
from ipsim.exact.bound_checks import (
    covariance_bound,
    exact_two_time_cov,
    oscillation,
    verify_cov_bound,
    verify_smoothness_bound,
)
from ipsim.exact.generator import (
    SemigroupCache,
    build_generator,
    propagate,
    semigroup_action,
    site_indicator,
    site_marginals,
    transient,
)
from ipsim.exceptions import StateSpaceCapError
from ipsim.graph.graph_builder import Graph, build_torus


@pytest.fixture
def single_site():
    return Graph.from_adjacency([[]], label="point")


@pytest.fixture
def two_isolated():
    return Graph.from_adjacency([[], []], label="pair")


# -- generator -------------------------------------------------------------------

def test_two_state_generator(single_site):
    gen = build_generator(single_site, IndependentFlip(up=1.0, down=1.0))
    np.testing.assert_allclose(gen.Q.toarray(), [[-1.0, 1.0], [1.0, -1.0]])
    assert gen.Lambda == 1.0


def test_contact_generator_on_triangle(cycle3, contact):
    gen = build_generator(cycle3, contact)
    Q = gen.Q.toarray()
    assert gen.dimension == 8
    np.testing.assert_allclose(Q.sum(axis=1), 0.0, atol=1e-12)
    off = Q - np.diag(np.diag(Q))
    assert np.all(off >= 0)
    for i, j in zip(*np.nonzero(off)):
        assert np.count_nonzero(gen.configs[i] != gen.configs[j]) == 1


def test_empty_rule_gives_zero_generator(cycle3):
    gen = build_generator(cycle3, Contact(0.0, 0.0))
    assert abs(gen.Q).sum() == 0.0
    assert gen.Lambda == 0.0


def test_state_space_cap(cycle8, contact):
    with pytest.raises(StateSpaceCapError):
        build_generator(cycle8, contact, cap=128)


# -- transient distributions -------------------------------------------------------

def test_transient_at_zero_is_point_mass(cycle3, contact):
    gen = build_generator(cycle3, contact)
    p = transient(gen, [1, 0, 1], 0.0)
    assert p[gen.index_of([1, 0, 1])] == 1.0
    assert p.sum() == 1.0


@pytest.mark.parametrize("t", [0.1, 0.7, 2.5])
def test_two_state_chain_matches_closed_form(single_site, t):
    gen = build_generator(single_site, IndependentFlip(up=1.0, down=1.0))
    p = transient(gen, [0], t)
    assert p[1] == pytest.approx((1 - math.exp(-2 * t)) / 2, abs=1e-9)


def test_independent_sites_factorise(two_isolated):
    gen = build_generator(two_isolated, IndependentFlip(up=1.0, down=0.5))
    p = transient(gen, [0, 1], 0.8)
    marg = site_marginals(gen, p)
    for i, eta in enumerate(gen.configs):
        assert p[i] == pytest.approx(marg[0, eta[0]] * marg[1, eta[1]], abs=1e-10)


def test_probability_conservation(cycle4, contact):
    gen = build_generator(cycle4, contact)
    for t in (0.05, 0.5, 3.0):
        p = transient(gen, [1, 1, 0, 0], t)
        assert p.sum() == pytest.approx(1.0, abs=1e-10)
        assert p.min() >= -1e-12


def test_semigroup_property(cycle4):
    rng = np.random.default_rng(2)
    for _ in range(3):
        rule = Contact(lam=rng.uniform(0.2, 2.0), delta=rng.uniform(0.2, 2.0))
        gen = build_generator(cycle4, rule)
        eta0 = rng.integers(0, 2, size=4)
        s, t = rng.uniform(0.1, 1.0, size=2)
        direct = transient(gen, eta0, s + t)
        stepped = propagate(gen, transient(gen, eta0, s), t)
        assert 0.5 * np.abs(direct - stepped).sum() < 1e-8


def test_semigroup_action_is_dual_to_propagation(cycle3, contact):
    gen = build_generator(cycle3, contact)
    f = site_indicator(gen, 1, 1)
    eta0 = [1, 0, 0]
    lhs = semigroup_action(gen, f, 0.6)[gen.index_of(eta0)]
    rhs = transient(gen, eta0, 0.6) @ f
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_semigroup_cache(cycle3, contact):
    gen = build_generator(cycle3, contact)
    cache = SemigroupCache(gen, [1, 1, 1], [0.5, 0.25, 1.0])
    assert cache.times == [0.25, 0.5, 1.0]
    np.testing.assert_allclose(cache.at(1.0), transient(gen, [1, 1, 1], 1.0), atol=1e-9)
    marg = cache.marginals(0.5)
    np.testing.assert_allclose(marg.sum(axis=1), 1.0, atol=1e-10)
    # all sites are equivalent on the triangle from a constant start
    assert np.ptp(marg[:, 1]) < 1e-10
    assert cache.expectation(site_indicator(gen, 0, 1), 0.5) == pytest.approx(marg[0, 1])
    with pytest.raises(KeyError):
        cache.at(0.3)


# -- covariances -------------------------------------------------------------------

def test_covariance_of_independent_sites_vanishes(two_isolated):
    gen = build_generator(two_isolated, IndependentFlip(up=1.0, down=1.0))
    f, g = site_indicator(gen, 0, 1), site_indicator(gen, 1, 1)
    assert abs(exact_two_time_cov(gen, [0, 0], f, g, 0.3, 0.9)) < 1e-8


def test_equal_time_self_covariance_is_bernoulli_variance(cycle3, contact):
    gen = build_generator(cycle3, contact)
    f = site_indicator(gen, 0, 1)
    p = site_marginals(gen, transient(gen, [1, 1, 1], 0.4))[0, 1]
    assert exact_two_time_cov(gen, [1, 1, 1], f, f, 0.4, 0.4) == pytest.approx(p * (1 - p), abs=1e-10)


def test_covariance_is_symmetric_at_equal_times(cycle4, contact):
    gen = build_generator(cycle4, contact)
    f, g = site_indicator(gen, 0, 1), site_indicator(gen, 2, 1)
    a = exact_two_time_cov(gen, [1, 1, 1, 1], f, g, 0.5, 0.5)
    b = exact_two_time_cov(gen, [1, 1, 1, 1], g, f, 0.5, 0.5)
    assert a == pytest.approx(b, abs=1e-12)
    # attractive dynamics from a deterministic start: positively correlated
    assert a > 0


def _dense_two_time_cov(gen, eta0, f, g_fn, s, t):
    Q = gen.Q.toarray()
    p_s = gen.point_mass(eta0) @ expm(s * Q)
    later = expm((t - s) * Q) @ g_fn
    return float(p_s @ (f * later)) - float(p_s @ f) * float(p_s @ later)


@pytest.mark.parametrize("s, t", [(0.0, 1.0), (0.5, 0.5), (0.3, 0.8), (0.7, 1.6)])
def test_antipodal_covariance_matches_dense_exponential(cycle4, contact, s, t):
    gen = build_generator(cycle4, contact)
    f, g = site_indicator(gen, 0, 1), site_indicator(gen, 2, 1)
    expected = _dense_two_time_cov(gen, [1, 1, 1, 1], f, g, s, t)
    assert exact_two_time_cov(gen, [1, 1, 1, 1], f, g, s, t) == pytest.approx(expected, abs=1e-9)
    if s == 0.0:
        assert expected == pytest.approx(0.0, abs=1e-12)


def test_two_time_covariance_of_a_pure_birth_site(single_site, pure_birth):
    # eta_s = 1 forces eta_t = 1, so Cov = P(eta_s = 1) P(eta_t = 0)
    gen = build_generator(single_site, pure_birth)
    f = site_indicator(gen, 0, 1)
    s, t = 0.4, 1.1
    expected = (1 - math.exp(-s)) * math.exp(-t)
    assert exact_two_time_cov(gen, [0], f, f, s, t) == pytest.approx(expected, abs=1e-9)
    assert exact_two_time_cov(gen, [0], f, f, t, s) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("s, t", [(0.2, 0.7), (0.5, 1.5), (1.2, 0.4)])
def test_increasing_observables_are_positively_correlated_across_times(cycle4, contact, s, t):
    gen = build_generator(cycle4, contact)
    occupancy = gen.configs.sum(axis=1).astype(float)
    pairs = [
        (site_indicator(gen, 0, 1), site_indicator(gen, 0, 1)),
        (site_indicator(gen, 0, 1), site_indicator(gen, 1, 1)),
        (site_indicator(gen, 0, 1), site_indicator(gen, 2, 1)),
        (occupancy, site_indicator(gen, 3, 1)),
        (occupancy, occupancy),
    ]
    for f, g in pairs:
        assert exact_two_time_cov(gen, [1, 1, 1, 1], f, g, s, t) > 0


def test_ladder_levels_are_positively_correlated_across_times(cycle4):
    rule = DegradationLadder(StateAlphabet.of_size(3), [0.3, 0.2], [1.0, 1.0])
    gen = build_generator(cycle4, rule)
    level0 = gen.configs[:, 0].astype(float)
    level2 = gen.configs[:, 2].astype(float)
    total = gen.configs.sum(axis=1).astype(float)
    for s, t in [(0.3, 0.9), (1.0, 0.5)]:
        assert exact_two_time_cov(gen, [0, 0, 0, 0], level0, level2, s, t) > 0
        assert exact_two_time_cov(gen, [0, 0, 0, 0], total, level0, s, t) > 0


def test_covariance_bound_zero_influence_limit():
    # D = 0: e^{D(t+s)}/D is replaced by 2 min(s, t)
    assert covariance_bound(1.0, 0.0, 1, 1.0, 0.0, 1, 0.0, 0.0) == 0.0
    assert covariance_bound(1.0, 0.0, 1, 1.0, 0.0, 1, 0.2, 0.5) > 0.0
    with pytest.raises(ValueError):
        covariance_bound(1.0, 1.0, 1, 0.5, 0.5, 1, 0.2, 0.5)


def test_cov_bound_on_cycle_of_eight(cycle8):
    gen = build_generator(cycle8, Contact(0.5, 1.0))
    report = verify_cov_bound(gen, [1] * 8, [1, 2, 3], [0.25, 0.5])
    assert report.passed
    assert report.violations == 0
    assert report.beta == pytest.approx(report.rho + 1.0)
    frame = report.to_frame()
    assert list(frame.columns[:6]) == ["d", "s", "t", "cov", "bound", "pass"]
    assert len(frame) == 3 * 4
    diag = frame[(frame["s"] == 0.5) & (frame["t"] == 0.5)].sort_values("d")
    assert diag["cov"].abs().is_monotonic_decreasing


def test_cov_bound_without_interaction(cycle8):
    gen = build_generator(cycle8, Contact(0.0, 1.0))
    report = verify_cov_bound(gen, [1] * 8, [1, 2], [0.0, 0.5])
    assert report.passed
    assert report.M == 0.0
    assert np.allclose(report.to_frame()["cov"], 0.0, atol=1e-10)


# -- smoothness --------------------------------------------------------------------

def test_oscillation_of_site_indicator(cycle3, contact):
    gen = build_generator(cycle3, contact)
    np.testing.assert_allclose(oscillation(gen, site_indicator(gen, 2, 1)), [0.0, 0.0, 1.0])


@pytest.mark.parametrize("t", [0.1, 0.3])
def test_smoothness_bound_contact_triangle(cycle3, contact, t):
    gen = build_generator(cycle3, contact)
    report = verify_smoothness_bound(gen, site_indicator(gen, 0, 1), t)
    assert report.passed
    assert list(report.to_frame().columns) == ["site", "lhs", "rhs", "pass"]


def test_smoothness_bound_at_time_zero_is_tight(cycle3, contact):
    gen = build_generator(cycle3, contact)
    report = verify_smoothness_bound(gen, site_indicator(gen, 1, 1), 0.0)
    frame = report.to_frame()
    np.testing.assert_allclose(frame["lhs"], frame["rhs"])


def test_smoothness_bound_independent_flips(cycle3):
    gen = build_generator(cycle3, IndependentFlip(up=1.0, down=1.0))
    frame = verify_smoothness_bound(gen, site_indicator(gen, 0, 1), 0.5).to_frame()
    np.testing.assert_allclose(frame["rhs"], [1.0, 0.0, 0.0])
    assert frame["pass"].all()
