"""Exact tools for perfect matchings and F-factors in dense k-uniform hypergraphs."""

__version__ = "0.1.0"

from .hypergraph import (
    Hypergraph,
    PatternGraph,
    VertexPartition,
    complete_kgraph,
    divisibility_barrier,
    index_vector,
    parse_hypergraph,
    serialize_hypergraph,
    sparsify,
)
from .lattice import IntegerLattice, coset_group, lattice_contains, lattice_from_generators, residue
from .decision import (
    DecisionOutcome,
    EdgeOracle,
    count_perfect_matchings,
    density_params,
    find_q_solution,
    has_f_factor,
    procedure_perfect_matching,
)
from .robustness import GoodPartition, PartitionParams, build_partition, robust_profile, verify_partition
