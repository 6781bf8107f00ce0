import numpy as np
import pytest

from ipsim.dynamics.rate_functionals import (
    enumerate_patterns,
    influence_matrix,
    monotonicity_certificate,
    pattern_count,
    positive_correlations_certificate,
    rate_envelope,
    total_rate_bound,
)
from ipsim.dynamics.rules import (
    BINARY,
    WORKING_FAILED,
    Contact,
    CustomRule,
    DegradationLadder,
    IndependentFlip,
    NeighborhoodTable,
    StateAlphabet,
    build_rule,
)
from ipsim.exceptions import EnumerationCapError, RuleError
from ipsim.experiment_config import ModelTable
from ipsim.graph.graph_builder import build_torus


# -- alphabets and rules -------------------------------------------------------

def test_alphabet_indexing():
    assert WORKING_FAILED.index("failed") == 1
    assert WORKING_FAILED.index(0) == 0
    assert BINARY.top == 1
    with pytest.raises(RuleError):
        WORKING_FAILED.index("broken")
    with pytest.raises(RuleError):
        StateAlphabet(["only"])


def test_rate_matrix_zeroes_own_state():
    rule = Contact(lam=1.0, delta=2.0)
    own = np.array([0, 1])
    counts = np.array([[[1, 3]], [[4, 0]]])
    rates = rule.rate_matrix(own, counts)
    np.testing.assert_allclose(rates, [[0.0, 3.0], [2.0, 0.0]])


def test_custom_rule_guards_negative_rates():
    rule = CustomRule(BINARY, 1, lambda own, counts: [0.0, -1.0])
    with pytest.raises(RuleError):
        rule.rate_vector(0, np.zeros((1, 2), dtype=int))


def test_ladder_validation():
    with pytest.raises(RuleError):
        DegradationLadder(StateAlphabet.of_size(3), [1.0], [0.0, 0.0])
    with pytest.raises(RuleError):
        DegradationLadder(StateAlphabet.of_size(3), [1.0, -1.0], [0.0, 0.0])


def test_build_rule_from_model_table():
    rule = build_rule(ModelTable.model_validate({"type": "contact", "lambda": 0.5, "delta": 1.0}))
    assert isinstance(rule, Contact)
    assert rule.lam == 0.5
    ladder = build_rule(ModelTable.model_validate({"type": "ladder", "a": [1.0, 2.0], "b": [0.5, 0.5]}))
    assert ladder.alphabet.size == 3
    flips = build_rule(ModelTable.model_validate({"type": "independent", "states": ["working", "failed"]}))
    assert flips.alphabet == WORKING_FAILED


def test_neighborhood_shells_on_torus():
    table = NeighborhoodTable(build_torus(2, 5), 2)
    assert set(table.shell_sizes) == {(4, 8)}
    assert table.templates() == [(4, 8)]


def test_pattern_enumeration_matches_count():
    own, counts = enumerate_patterns((4, 2), 3)
    assert len(own) == pattern_count((4, 2), 3) == 3 * 15 * 6
    assert np.all(counts.sum(axis=2) == np.array([4, 2]))


# -- B -----------------------------------------------------------------------

def test_rate_bound_independent_flip(pure_birth):
    bound = total_rate_bound(pure_birth)
    assert bound.value == 1.0
    assert bound.exact


def test_rate_bound_contact_on_square_torus(torus5):
    assert total_rate_bound(Contact(1.0, 1.0), torus5).value == pytest.approx(4.0)


def test_rate_bound_of_idle_ladder():
    rule = DegradationLadder(StateAlphabet.of_size(4), [0.0] * 3, [0.0] * 3)
    assert total_rate_bound(rule).value == 0.0


def test_rate_bound_cap_and_sampling():
    rule = DegradationLadder(StateAlphabet.of_size(10), [1.0] * 9, [0.5] * 9, range_=2)
    g = build_torus(2, 7)
    with pytest.raises(EnumerationCapError):
        total_rate_bound(rule, g, cap=1000)
    sampled = total_rate_bound(rule, g, allow_sampling=True, cap=1000)
    assert not sampled.exact
    assert 0 < sampled.value <= 1.0 + 0.5 * 9


# -- influence ---------------------------------------------------------------

def test_independent_flip_has_no_influence(torus5, pure_birth):
    inf = influence_matrix(pure_birth, torus5)
    assert inf.M == 0.0
    assert inf.matrix.nnz == 0


def test_contact_influence_is_lambda_on_neighbours(torus5):
    inf = influence_matrix(Contact(0.7, 1.0), torus5)
    gamma = inf.dense()
    assert inf.M == pytest.approx(0.7 * 4)
    for y in torus5.neighbors(0):
        assert gamma[0, y] == pytest.approx(0.7)
    assert gamma[0, 0] == 0.0


@pytest.mark.parametrize(
    "rule",
    [
        Contact(0.5, 1.0, range_=2),
        DegradationLadder(StateAlphabet.of_size(3), [0.2, 0.3], [1.0, 2.0], range_=2),
        IndependentFlip(up=1.0, down=0.5, range_=2),
    ],
)
def test_influence_vanishes_beyond_range(rule):
    g = build_torus(2, 7)
    gamma = influence_matrix(rule, g).dense()
    for x in g.vertices:
        dist = g.distances_from(x)
        far = [y for y, d in dist.items() if d > rule.range or d == 0]
        assert np.all(gamma[x, far] == 0.0)


# -- monotonicity ----------------------------------------------------------------

@pytest.mark.parametrize(
    "rule",
    [
        Contact(1.0, 1.0),
        Contact(0.5, 0.0, spontaneous=0.1),
        IndependentFlip(up=1.0, down=0.0),
        DegradationLadder(StateAlphabet.of_size(4), [0.1, 0.2, 0.3], [1.0, 1.0, 1.0]),
    ],
)
def test_built_in_rules_are_certified(rule):
    cert = monotonicity_certificate(rule)
    assert cert.passed
    assert cert.checked_pairs > 0
    assert positive_correlations_certificate(rule).passed


def test_counterexample_rule_is_rejected(anti_monotone):
    cert = monotonicity_certificate(anti_monotone)
    assert not cert.passed
    assert cert.violation["direction"] == "up"
    assert cert.violation["low_rate"] > cert.violation["high_rate"]
    assert not positive_correlations_certificate(anti_monotone).passed


def test_rate_envelope_contact(torus5):
    sup_up, sup_down = rate_envelope(Contact(1.0, 0.5), torus5)
    assert sup_up == pytest.approx(4.0)
    assert sup_down == pytest.approx(0.5)
