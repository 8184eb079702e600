"""Greedy sparse recovery: OMP, its successive-regression variants, and tools
for checking coherence-based recovery conditions."""

from .dictionary import (
    Dictionary,
    check_cumulative_condition,
    check_strong_condition,
    coherence,
    cumulative_coherence,
    normalize_columns,
)
from .errors import FastOMPError, RankDeficiencyError
from .linalg import FlopCounter
from .pursuit import (
    SolverConfig,
    SolverResult,
    SparseSignal,
    bsr,
    cost_model,
    gomp,
    omp_naive,
    omp_qr,
    omp_sr,
    select_atom,
    select_block,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "Dictionary",
    "FastOMPError",
    "FlopCounter",
    "RankDeficiencyError",
    "SolverConfig",
    "SolverResult",
    "SparseSignal",
    "bsr",
    "check_cumulative_condition",
    "check_strong_condition",
    "coherence",
    "cost_model",
    "cumulative_coherence",
    "gomp",
    "normalize_columns",
    "omp_naive",
    "omp_qr",
    "omp_sr",
    "select_atom",
    "select_block",
    "solve",
]
