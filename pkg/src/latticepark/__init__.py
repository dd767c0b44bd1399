"""Gap statistics of the symmetric lattice parking process.

Cars (centers of exclusion blocks) park one by one, uniformly over the
admissible positions of a lot with n + k - 1 slots, until the lot jams.
This package computes the expected gap-count sequences exactly, their
limiting densities with certified truncation bounds, the continuum
reference values they converge to, and an independent simulation oracle,
plus a CLI that emits the datasets as CSV.
"""

__version__ = "0.1.0"

from .continuum import (
    CoverageGrid,
    QuadratureConfig,
    asymptote_check,
    dr_bracket,
    inner_integral,
    renyi_constant,
    renyi_constant_with_error,
    solve_coverage,
)
from .densities import (
    DensityTable,
    ProfilePoint,
    SweepPoint,
    aggregate_initial_values,
    density,
    density_table,
    filling_density_aggregate,
    profile,
    sweep,
)
from .errors import ConvergenceError, ResourceLimitError
from .recursion import (
    GapParams,
    RecursionWindow,
    TruncationReport,
    advance,
    closed_form_u_k1,
    exact_gap_expectation,
    finite_sequences,
    initial_a,
    initial_u,
    initial_window,
    t_limit,
)
from .simulator import (
    GapCounts,
    LotState,
    SplitMix64,
    brute_force_expectation,
    estimate_gap_expectation,
    simulate_lot,
)


def __getattr__(name):
    # RunManifest lives in the CLI module; importing it lazily keeps plain
    # library use free of argparse wiring
    if name == "RunManifest":
        from .cli import RunManifest

        return RunManifest
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

__all__ = [
    "__version__",
    "ConvergenceError",
    "ResourceLimitError",
    "GapParams",
    "RecursionWindow",
    "TruncationReport",
    "initial_a",
    "initial_u",
    "initial_window",
    "advance",
    "t_limit",
    "finite_sequences",
    "exact_gap_expectation",
    "closed_form_u_k1",
    "DensityTable",
    "SweepPoint",
    "ProfilePoint",
    "density",
    "density_table",
    "filling_density_aggregate",
    "aggregate_initial_values",
    "sweep",
    "profile",
    "QuadratureConfig",
    "CoverageGrid",
    "renyi_constant",
    "renyi_constant_with_error",
    "inner_integral",
    "solve_coverage",
    "asymptote_check",
    "dr_bracket",
    "LotState",
    "GapCounts",
    "SplitMix64",
    "simulate_lot",
    "estimate_gap_expectation",
    "brute_force_expectation",
]
