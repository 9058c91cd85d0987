from app.physics.protocol import control_function, protocol_timing
from app.physics.trap import (
    duffing_coefficient,
    effective_trap_frequency,
    fock_position_std,
    gas_damping_rate,
    gradient_force,
    mean_gas_speed,
    particle_mass,
    recoil_decoherence_constant,
    recoil_rate,
    thermal_position_std,
    trap_depth,
    trap_frequency,
    trap_potential,
    zero_point_fluctuation,
)

__all__ = [
    'control_function',
    'protocol_timing',
    'duffing_coefficient',
    'effective_trap_frequency',
    'fock_position_std',
    'gas_damping_rate',
    'gradient_force',
    'mean_gas_speed',
    'particle_mass',
    'recoil_decoherence_constant',
    'recoil_rate',
    'thermal_position_std',
    'trap_depth',
    'trap_frequency',
    'trap_potential',
    'zero_point_fluctuation',
]
