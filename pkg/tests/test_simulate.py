import math

import numpy as np
import pytest

from ipsim.dynamics.rules import Contact, DegradationLadder, IndependentFlip, StateAlphabet
from ipsim.exact.generator import SemigroupCache, build_generator
from ipsim.exceptions import CouplingOrderError, NotMonotoneError, ObservationError, SimulationError
from ipsim.graph.graph_builder import Graph, build_torus
from ipsim.graph.graph_metrics import Region
from ipsim.simulate.fenwick import FenwickTree
from ipsim.simulate.gillespie import coupled_pair, gillespie, replica_stream
from ipsim.simulate.observe import EmpiricalSeries, first_crossing, observe, snapshot
from ipsim.simulate.replicas import run_replicas


def _same_log(a, b):
    return (
        np.array_equal(a.times, b.times)
        and np.array_equal(a.sites, b.sites)
        and np.array_equal(a.from_states, b.from_states)
        and np.array_equal(a.to_states, b.to_states)
    )


def _replay(log, t):
    config = log.initial.copy()
    for time, x, _, b in zip(log.times, log.sites, log.from_states, log.to_states):
        if time > t:
            break
        config[x] = b
    return config


# -- Fenwick tree --------------------------------------------------------------

def test_fenwick_prefix_search_matches_brute_force():
    rng = np.random.default_rng(0)
    values = rng.uniform(0, 2, size=37)
    values[[3, 10, 11]] = 0.0
    tree = FenwickTree(values, rebuild_every=5)
    for _ in range(40):
        i = int(rng.integers(37))
        v = float(rng.choice([0.0, rng.uniform(0, 3)]))
        tree.set(i, v)
        values[i] = v
    assert tree.total() == pytest.approx(values.sum())
    cum = np.cumsum(values)
    for u in rng.uniform(0, values.sum(), size=200):
        assert tree.find(u) == int(np.searchsorted(cum, u, side="right"))


# -- single trajectories -------------------------------------------------------------

def test_zero_rates_give_empty_log(cycle4):
    log = gillespie(cycle4, Contact(0.0, 0.0), [1, 0, 1, 0], 5.0)
    assert len(log) == 0
    np.testing.assert_array_equal(log.final(), [1, 0, 1, 0])


def test_non_positive_horizon_rejected(cycle4, contact):
    with pytest.raises(SimulationError):
        gillespie(cycle4, contact, [1, 1, 1, 1], 0.0)


def test_initial_configuration_length_checked(cycle4, contact):
    with pytest.raises(SimulationError):
        gillespie(cycle4, contact, [1, 1, 1], 1.0)


def test_same_seed_and_replica_reproduce_the_log(torus5, contact):
    eta0 = [1] * 25
    a = gillespie(torus5, contact, eta0, 2.0, seed=42, replica_id=3)
    b = gillespie(torus5, contact, eta0, 2.0, seed=42, replica_id=3)
    c = gillespie(torus5, contact, eta0, 2.0, seed=42, replica_id=4)
    assert len(a) > 0
    assert _same_log(a, b)
    assert not _same_log(a, c)


def test_replica_streams_are_keyed():
    a = replica_stream(7, 0).random(4)
    np.testing.assert_array_equal(a, replica_stream(7, 0).random(4))
    assert not np.array_equal(a, replica_stream(7, 1).random(4))


def test_event_log_replays(torus5):
    rule = DegradationLadder(StateAlphabet.of_size(3), [0.5, 0.5], [1.0, 1.0])
    log = gillespie(torus5, rule, [0] * 25, 2.0, seed=1)
    log.validate()
    assert np.all(np.diff(log.times) > 0)
    assert np.all(log.to_states == log.from_states + 1)
    frame = log.to_frame()
    assert list(frame.columns) == ["time", "site", "from", "to"]


# -- observation ---------------------------------------------------------------

def test_observe_at_time_zero_counts_the_start(torus5, contact):
    eta0 = [1, 0] * 12 + [1]
    log = gillespie(torus5, contact, eta0, 1.0, seed=3)
    series = observe(log, Region.whole(torus5), [0.0], f=[0.0, 1.0])
    np.testing.assert_array_equal(series.counts[0], [12, 13])
    assert series.degradation[0] == 13


def test_observe_matches_brute_force_replay(torus5, contact):
    log = gillespie(torus5, contact, [1] * 25, 1.5, seed=9)
    region = Region.of(torus5, range(0, 25, 2))
    grid = [0.0, 0.3, 0.75, 1.5]
    series = observe(log, region, grid, n_states=2)
    for i, t in enumerate(grid):
        config = _replay(log, t)
        expected = np.bincount(config[region.as_array()], minlength=2)
        np.testing.assert_array_equal(series.counts[i], expected)
        np.testing.assert_array_equal(snapshot(log, t), config)
    assert np.all(series.counts.sum(axis=1) == len(region))


def test_observe_rejects_grid_past_horizon(cycle4, contact):
    log = gillespie(cycle4, contact, [1] * 4, 1.0)
    with pytest.raises(ObservationError):
        observe(log, range(4), [0.5, 1.5])
    with pytest.raises(ObservationError):
        snapshot(log, 2.0)


def test_empirical_series_conservation_enforced():
    with pytest.raises(ObservationError):
        EmpiricalSeries("R", 3, np.array([0.0]), np.array([[1, 1]]))


def test_first_crossing_cases():
    point = Graph.from_adjacency([[]])
    log = gillespie(point, IndependentFlip(up=1.0), [0], 50.0, seed=5)
    assert len(log) == 1
    f = [0.0, 1.0]
    assert first_crossing(log, [0], f, 0.0) == 0.0
    assert first_crossing(log, [0], f, 1.0) == log.times[0]
    assert first_crossing(log, [0], f, 2.0) is None


# -- replicas ------------------------------------------------------------------

def test_single_replica_equals_direct_run(torus5, contact):
    region = Region.whole(torus5)
    grid = [0.0, 0.5, 1.0]
    results = run_replicas(torus5, contact, [1] * 25, 1.0, 1, seed=8, grid=grid, region=region,
                           f=[0.0, 1.0], keep_logs=1)
    log = gillespie(torus5, contact, [1] * 25, 1.0, seed=8, replica_id=0)
    assert _same_log(results.logs[0], log)
    np.testing.assert_array_equal(results.series[0].counts, observe(log, region, grid, n_states=2).counts)


def test_replicas_do_not_depend_on_thread_count(torus5, contact):
    kwargs = dict(grid=[0.0, 0.5, 1.0], region=Region.whole(torus5), f=[0.0, 1.0], threshold=18)
    one = run_replicas(torus5, contact, [0] * 12 + [1] * 13, 1.0, 24, seed=5, threads=1, **kwargs)
    two = run_replicas(torus5, contact, [0] * 12 + [1] * 13, 1.0, 24, seed=5, threads=2, **kwargs)
    for a, b in zip(one.series, two.series):
        np.testing.assert_array_equal(a.counts, b.counts)
    np.testing.assert_array_equal(one.crossings, two.crossings)
    np.testing.assert_array_equal(one.event_counts, two.event_counts)


def test_independent_flip_mean_fraction(torus5, pure_birth):
    grid = [0.5, 1.0]
    results = run_replicas(torus5, pure_birth, [0] * 25, 1.0, 800, seed=21, grid=grid,
                           region=Region.whole(torus5), f=[0.0, 1.0])
    frac = np.array([s.counts[:, 1] for s in results.series]) / 25.0
    for i, t in enumerate(grid):
        se = frac[:, i].std(ddof=1) / math.sqrt(len(frac))
        assert abs(frac[:, i].mean() - (1 - math.exp(-t))) < 4 * se


def _oracle_gap(g, rule, eta0, times, n_replicas, seed):
    """Largest |MC mean - exact marginal| / SE over sites pooled, per grid time."""
    exact = SemigroupCache(build_generator(g, rule), eta0, times)
    results = run_replicas(g, rule, eta0, max(times), n_replicas, seed, grid=times,
                           region=Region.whole(g), f=[0.0, 1.0])
    frac = np.array([s.counts[:, 1] for s in results.series]) / g.V
    worst = 0.0
    for i, t in enumerate(times):
        p = exact.marginals(t)[:, 1].mean()
        se = frac[:, i].std(ddof=1) / math.sqrt(n_replicas)
        worst = max(worst, abs(frac[:, i].mean() - p) / se)
    return worst


def test_simulation_matches_exact_marginals(cycle3, contact):
    assert _oracle_gap(cycle3, contact, [1, 1, 1], [0.25, 0.5, 1.0], 3000, seed=13) < 4.0


@pytest.mark.slow
@pytest.mark.parametrize("side", [3, 4])
def test_simulation_matches_exact_marginals_at_scale(side, contact):
    g = build_torus(1, side)
    assert _oracle_gap(g, contact, [1] * side, [0.25, 0.5, 1.0], 100_000, seed=17) < 3.0


# -- monotone coupling -------------------------------------------------------

def test_equal_starts_couple_identically(torus5, contact):
    eta0 = [1, 0, 0, 1, 0] * 5
    lo, hi = coupled_pair(torus5, contact, eta0, eta0, 1.0, seed=2)
    assert _same_log(lo, hi)


def _coupling_violations(n_replicas, g=None, rule=None):
    g = build_torus(2, 8) if g is None else g
    rule = Contact(1.0, 1.0) if rule is None else rule
    W = rule.alphabet.size
    rng = np.random.default_rng(4)
    times = np.linspace(0, 1.0, 100)
    violations = 0
    for rep in range(n_replicas):
        low = rng.integers(0, W, size=g.V)
        high = np.maximum(low, rng.integers(0, W, size=g.V))
        lo, hi = coupled_pair(g, rule, low, high, 1.0, seed=6, replica_id=rep)
        violations += sum(int(np.any(lo.config_at(t) > hi.config_at(t))) for t in times)
    return violations


def test_coupling_preserves_order():
    assert _coupling_violations(10) == 0


@pytest.mark.slow
def test_coupling_preserves_order_over_hundred_replicas():
    assert _coupling_violations(100) == 0


CERTIFIED_RULES = [
    Contact(1.0, 1.0),
    IndependentFlip(up=1.0, down=0.0),
    DegradationLadder(StateAlphabet.of_size(4), [0.1, 0.2, 0.3], [1.0, 1.0, 1.0]),
]


@pytest.mark.parametrize("rule", CERTIFIED_RULES, ids=["contact", "independent", "ladder"])
def test_coupling_order_on_three_by_three_torus(rule):
    assert _coupling_violations(10, build_torus(2, 3), rule) == 0


@pytest.mark.slow
@pytest.mark.parametrize("rule", CERTIFIED_RULES, ids=["contact", "independent", "ladder"])
def test_coupling_order_on_three_by_three_torus_hundred_replicas(rule):
    assert _coupling_violations(100, build_torus(2, 3), rule) == 0


def test_coupling_refuses_non_monotone_rule(torus5, anti_monotone):
    with pytest.raises(NotMonotoneError):
        coupled_pair(torus5, anti_monotone, [0] * 25, [1] * 25, 1.0)


def test_coupling_rejects_unordered_starts(torus5, contact):
    with pytest.raises(CouplingOrderError):
        coupled_pair(torus5, contact, [1] + [0] * 24, [0] * 25, 1.0)
