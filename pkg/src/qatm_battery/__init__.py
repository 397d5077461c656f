"""Open-system simulator for a qubit battery charged through a driven
charger and a two-qubit autonomous thermal machine."""

from .dynamics import (
    DensityMatrix,
    IntegrationError,
    InvalidStateError,
    Trajectory,
    default_backend,
    integrate,
    lindblad_rhs,
    phi,
)
from .linalg import (
    STANDARD_LAYOUT,
    HermitianEig,
    SubsystemLayout,
    embed,
    hermitian_eig,
    kron,
    partial_trace,
    trace_norm,
)
from .model import (
    ModelParams,
    SystemOperators,
    bose_occupation,
    build_drive,
    build_free_hamiltonians,
    build_interactions,
    build_jump_operators,
    build_operators,
    composite_initial_state,
    machine_regime,
    thermal_qubit_state,
    verify_conservation_commutators,
    virtual_temperature,
)
from .observables import (
    TimeSeries,
    charging_power,
    coherence_series,
    coherence_values,
    dephased,
    ergotropy,
    ergotropy_fraction_values,
    ergotropy_series,
    information_backflow,
    internal_energy,
    machine_energy,
    mutual_information_cb,
    mutual_information_cb_series,
    mutual_information_m12cb,
    mutual_information_m12cb_series,
    passive_state,
    relative_entropy_of_coherence,
    total_correlation,
    trace_distance_derivative,
    trace_distance_series,
    von_neumann_entropy,
)
from .scenarios import (
    CATALOG,
    ConfigError,
    ScenarioConfig,
    SweepSpec,
    load_config,
    run_scenario,
    self_check,
)

__version__ = "0.1.0"
