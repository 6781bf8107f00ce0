from ipsim.simulate.gillespie import (
    RNG_ALGORITHM,
    EventLog,
    GillespieSimulator,
    coupled_pair,
    gillespie,
    replica_stream,
)
from ipsim.simulate.observe import EmpiricalSeries, first_crossing, observe, snapshot
from ipsim.simulate.replicas import ReplicaResults, run_replicas
