"""Private contiguous-block retrieval: rate-optimal multi-server queries for
contiguous demand windows, with exact bounds, a decoder and auditors."""

from .field import FieldElement, MessageStore, add, generate_store, sub
from .params import (
    Params, ParameterError, Regime, canonical_permutation, converse_bound,
    coprimality_tightness, derive_params, optimal_rate, subpack_lower,
    subpack_upper, symbols_per_server,
)
from .protocol import (
    Answer, DecodeResult, DecodingError, answer_query, coefficient_matrix,
    decode, oracle_decodable, run_round_trip,
)
from .scheme import (
    ConstructionError, Partition, QueryPlan, SymbolSpec, build_canonical_plan,
    build_partition, demand_window, enumerate_supports, mask_plan,
    reduce_large_demand,
)

__version__ = "0.1.0"
