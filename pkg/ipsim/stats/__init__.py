from ipsim.stats.moments import MomentAccumulator, MomentEstimates, estimate_moments
from ipsim.stats.normality import CltReport, clt_check, ks_distance, lilliefors_critical_value
from ipsim.stats.variance_scan import VarianceRatioReport, variance_ratio_scan
from ipsim.stats.hitting import HittingReport, KOutOfN, hitting_analysis, kout_of_n_mode
