from app.simulator.classical import (
    euler_maruyama_step,
    resolve_sim_config,
    run_ensemble,
    sample_thermal_state,
    simulate_trajectory,
    trajectory_seed,
    variance_timeseries,
)
from app.simulator.quantum import build_hamiltonian_terms, prepare_initial_state, propagate
from app.simulator.wigner import (
    fock_populations,
    marginal_wigner_x,
    negativity_increment,
    purity,
    wigner_negativity,
    wigner_transform,
)

__all__ = [
    'euler_maruyama_step',
    'resolve_sim_config',
    'run_ensemble',
    'sample_thermal_state',
    'simulate_trajectory',
    'trajectory_seed',
    'variance_timeseries',
    'build_hamiltonian_terms',
    'prepare_initial_state',
    'propagate',
    'fock_populations',
    'marginal_wigner_x',
    'negativity_increment',
    'purity',
    'wigner_negativity',
    'wigner_transform',
]
