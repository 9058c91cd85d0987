"""
입자·트랩·기체에 대한 닫힌 형태의 물리 공식.

모든 함수는 SI 단위를 받고 돌려주는 순수 함수입니다.
"""
import math
from typing import Optional, Tuple, Union

import numpy as np

from app.models.physics import (
    CONSTANTS,
    GasEnvironment,
    ParticleSpec,
    PhysicalConstants,
    TrapSpec,
)

ArrayLike = Union[float, np.ndarray]


def particle_mass(p: ParticleSpec) -> float:
    """입자 질량 ρ·(4/3)π·r³ [kg]"""
    return p.density * (4.0 / 3.0) * math.pi * p.radius**3


def mean_gas_speed(g: GasEnvironment, constants: PhysicalConstants = CONSTANTS) -> float:
    """기체 분자의 rms 열속도 sqrt(3 k_B T / m_gas) [m/s]"""
    return math.sqrt(3.0 * constants.kB * g.temperature / g.gas_molecular_mass)


def gas_damping_rate(
    p: ParticleSpec, g: GasEnvironment, constants: PhysicalConstants = CONSTANTS
) -> float:
    """기체 감쇠율 Γ_m = 64 r² P / (m v̄_gas) [1/s]"""
    return 64.0 * p.radius**2 * g.pressure / (particle_mass(p) * mean_gas_speed(g, constants))


def clausius_mossotti(t: TrapSpec, p: ParticleSpec) -> float:
    """(n_r² − 1)/(n_r² + 2), n_r = n_p / n_m"""
    n_r = p.refractive_index / t.medium_index
    return (n_r**2 - 1.0) / (n_r**2 + 2.0)


def _polarizability_prefactor(t: TrapSpec, p: ParticleSpec, constants: PhysicalConstants) -> float:
    return 2.0 * math.pi * t.medium_index * p.radius**3 / constants.c * clausius_mossotti(t, p)


def peak_intensity(t: TrapSpec, power: float) -> float:
    """초점 세기 I₀ = 2P / (π w₀²) [W/m²]"""
    return 2.0 * power / (math.pi * t.waist_w0**2)


def trap_depth(
    t: TrapSpec, p: ParticleSpec, power: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """포텐셜 깊이 U₀ [J], 출력에 선형"""
    return _polarizability_prefactor(t, p, constants) * peak_intensity(t, power)


def trap_potential(
    x: ArrayLike, t: TrapSpec, p: ParticleSpec, power: float, constants: PhysicalConstants = CONSTANTS
) -> ArrayLike:
    """뒤집힌 가우시안 포텐셜 U(x) = −U₀ exp(−2x²/w₀²) [J]"""
    x = np.asarray(x, dtype=float)
    return -trap_depth(t, p, power, constants) * np.exp(-2.0 * x**2 / t.waist_w0**2)


def gradient_force(
    x: ArrayLike, t: TrapSpec, p: ParticleSpec, power: float, constants: PhysicalConstants = CONSTANTS
) -> ArrayLike:
    """
    Rayleigh 영역의 기울기 힘 F(x) = α ∂I/∂x [N].

    I(x) = I₀ exp(−2x²/w₀²) 이므로 F = −∂U/∂x 이며 F(x)·x ≤ 0 (복원력).
    """
    x = np.asarray(x, dtype=float)
    w2 = t.waist_w0**2
    intensity = peak_intensity(t, power) * np.exp(-2.0 * x**2 / w2)
    d_intensity = -4.0 * x / w2 * intensity
    force = _polarizability_prefactor(t, p, constants) * d_intensity
    return float(force) if force.ndim == 0 else force


def trap_frequency(
    t: TrapSpec, p: ParticleSpec, power: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """가우시안 최소점의 조화 근사 주파수 ω = sqrt(4U₀/(m w₀²)) [rad/s]"""
    return math.sqrt(4.0 * trap_depth(t, p, power, constants) / (particle_mass(p) * t.waist_w0**2))


def effective_trap_frequency(
    t: TrapSpec, p: ParticleSpec, constants: PhysicalConstants = CONSTANTS
) -> float:
    """보정된 frequency_hz가 있으면 그 값을, 없으면 고출력에서의 공식 값을 씁니다."""
    if t.frequency_hz is not None:
        return 2.0 * math.pi * t.frequency_hz
    return trap_frequency(t, p, t.power_high, constants)


def duffing_coefficient_model(t: TrapSpec) -> float:
    """뒤집힌 가우시안 모델의 ξ = −2/w₀² [1/m²]"""
    return -2.0 / t.waist_w0**2


def duffing_coefficient(t: TrapSpec) -> float:
    """F/m = −ω²(x + ξx³) 관례의 ξ [1/m²]; 측정값이 설정되어 있으면 그것을 우선"""
    if t.duffing_xi is not None:
        return t.duffing_xi
    return duffing_coefficient_model(t)


def thermal_position_std(m: float, omega: float, T: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """열평형 위치 표준편차 sqrt(k_B T/(m ω²)) [m]"""
    if T < 0:
        raise ValueError(f"온도는 음수일 수 없습니다: {T}")
    return math.sqrt(constants.kB * T / (m * omega**2))


def zero_point_fluctuation(m: float, omega: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Δx_zpf = sqrt(ħ/(2mω)) [m]"""
    return math.sqrt(constants.hbar / (2.0 * m * omega))


def fock_position_std(n: int, m: float, omega: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Fock 상태 |n⟩의 위치 표준편차 sqrt(2n+1)·Δx_zpf [m]"""
    if n < 0:
        raise ValueError(f"n은 0 이상이어야 합니다: {n}")
    return math.sqrt(2 * n + 1) * zero_point_fluctuation(m, omega, constants)


def tweezer_field_amplitude(
    t: TrapSpec, power: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """E₀ = sqrt(4P₀ / (π ε₀ c w₀² A_x A_y)) [V/m]"""
    return math.sqrt(
        4.0 * power
        / (math.pi * constants.eps0 * constants.c * t.waist_w0**2 * t.asymmetry_x * t.asymmetry_y)
    )


def recoil_decoherence_constant(
    t: TrapSpec,
    p: ParticleSpec,
    power: float,
    asymmetry: Optional[Tuple[float, float]] = None,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """
    광자 반동 결어긋남 상수 Λ [Hz/m²].

    Λ = (7π ε₀ / 30ħ) · (ε_c V E₀ / 2π)² · k₀⁵,  ε_c = 3(ε−1)/(ε+2), k₀ = 2π/λ

    Args:
        asymmetry: (A_x, A_y); None이면 TrapSpec 값 사용
    """
    if asymmetry is not None:
        t = t.model_copy(update={"asymmetry_x": asymmetry[0], "asymmetry_y": asymmetry[1]})
    eps = p.dielectric_constant
    eps_c = 3.0 * (eps - 1.0) / (eps + 2.0)
    k0 = 2.0 * math.pi / t.wavelength
    e0 = tweezer_field_amplitude(t, power, constants)
    prefactor = 7.0 * math.pi * constants.eps0 / (30.0 * constants.hbar)
    return prefactor * (eps_c * p.volume * e0 / (2.0 * math.pi)) ** 2 * k0**5


def recoil_rate(lambda_recoil: float, dx_zpf: float) -> float:
    """결어긋남률 Γ = Λ Δx_zpf² [Hz]"""
    if lambda_recoil < 0 or dx_zpf < 0:
        raise ValueError("lambda_recoil과 dx_zpf는 음수일 수 없습니다")
    return lambda_recoil * dx_zpf**2
