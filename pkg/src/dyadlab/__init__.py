"""Exact finite-dyadic laboratory for matrix A2 weights, Carleson embeddings,
weighted maximal functions, matrix sequence spaces and sparse operators.
"""

from .carleson import (
    CarlesonSequence,
    StoppingDecomposition,
    check_g_domination,
    embedding_constant,
    scalar_cet_ratio,
    stopping_time,
    testing_constant_matrix,
    testing_constant_norm,
)
from .dyadic import DyadicIndex, DyadicTree, parse_index
from .errors import (
    DimensionMismatchError,
    DyadlabError,
    InvariantViolation,
    LevelOverflowError,
    NotSPDError,
)
from .maximal import check_domination, maximal_aux, maximal_mw, maximal_norm_lower_bound
from .seqspaces import (
    MatrixSequence,
    OmegaDecomposition,
    check_sest,
    duality_ratio,
    omega_decomposition,
    pairing,
    s_norm,
    square_function,
    t_norm,
)
from .sparse import (
    SparseFamily,
    apply_sparse,
    bound_ratio,
    generate_sparse,
    is_sparse,
    packing_bound,
    packing_constant,
    proof_chain_diagnostic,
    sparse_children,
    sparse_weighted_norm,
)
from .weights import (
    GridVectorFn,
    MatrixWeight,
    a2_characteristic,
    average,
    contraction_check,
    inverse_weight,
    reverse_holder_integral,
    spd_power,
    weighted_l2_norm,
)

__version__ = "0.1.0"
