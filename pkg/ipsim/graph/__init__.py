from ipsim.graph.graph_builder import (
    Graph,
    GraphKind,
    build_graph,
    build_tetra_tree_ball,
    build_torus,
    build_tree_ball,
)
from ipsim.graph.graph_metrics import (
    Region,
    ball,
    bfs_distance,
    growth_report,
    region_boundary,
    sphere,
    transitivity_witness,
)
