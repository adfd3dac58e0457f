"""Ground-state numerics for the single-mode Dicke model.

Three routes to the same observables: exact diagonalization in a truncated
Fock space, product coherent states (mean field), and parity-projected
coherent states.
"""

from .exact import (
    EigenResult,
    converge_cutoff,
    converged_lowest,
    energy_gap,
    expectation_set,
    lowest_states,
    refined_doublet,
)
from .meanfield import (
    CriticalPointResult,
    Phase,
    VariationalPoint,
    critical_point,
    energy_surface,
    mean_field_observables,
    minimize_surface,
)
from .model import (
    Basis,
    BasisIndex,
    ModelParams,
    Parity,
    build_basis,
    hamiltonian_matrix,
    observable_matrix,
)
from .observables import ObservableSet
from .projected import (
    OverlapFactor,
    deep_limit_observables,
    f_factor,
    materialize_projected_state,
    projected_observables,
)

__version__ = "0.1.0"
