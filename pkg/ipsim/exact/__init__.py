from ipsim.exact.generator import (
    GeneratorMatrix,
    SemigroupCache,
    build_generator,
    propagate,
    semigroup_action,
    site_indicator,
    site_marginals,
    transient,
)
from ipsim.exact.bound_checks import (
    CovBoundReport,
    SmoothBoundReport,
    exact_two_time_cov,
    oscillation,
    verify_cov_bound,
    verify_smoothness_bound,
)
