from ipsim.dynamics.rules import (
    BINARY,
    WORKING_FAILED,
    Contact,
    CustomRule,
    DegradationLadder,
    IndependentFlip,
    LocalRule,
    NeighborhoodTable,
    RuleKind,
    StateAlphabet,
    build_rule,
)
from ipsim.dynamics.rate_functionals import (
    Certificate,
    Influence,
    RateBound,
    influence_matrix,
    monotonicity_certificate,
    positive_correlations_certificate,
    rate_envelope,
    total_rate_bound,
)
