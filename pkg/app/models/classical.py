import math
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.models.physics import CONSTANTS, GasEnvironment, ParticleSpec, TrapSpec


class ClassicalPhysics(BaseModel):
    """Langevin 적분기에 넘기는 해석된 물리량 묶음 (SI)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mass: float = Field(gt=0)
    # 고출력 각주파수 ω [rad/s]
    omega: float = Field(gt=0)
    # 에너지 감쇠율 Γ_m [1/s]
    gamma: float = Field(ge=0)
    temperature: float = Field(ge=0)
    force_model: Literal["gaussian", "duffing", "linear"] = "gaussian"
    # 가우시안 힘 모델의 유효 허리 [m]
    waist: float = Field(default=math.inf, gt=0)
    # Duffing 계수 ξ [1/m²]
    xi: float = 0.0
    kB: float = CONSTANTS.kB

    @classmethod
    def from_specs(
        cls,
        particle: ParticleSpec,
        trap: TrapSpec,
        gas: GasEnvironment,
        force_model: str = "gaussian",
    ) -> "ClassicalPhysics":
        """파라미터 레코드로부터 물리량을 결정합니다."""
        from app.physics.trap import (
            duffing_coefficient,
            effective_trap_frequency,
            gas_damping_rate,
            particle_mass,
        )

        xi = duffing_coefficient(trap)
        # 측정된 ξ가 있으면 같은 ξ를 주는 유효 허리 sqrt(−2/ξ)를 씀
        if trap.duffing_xi is not None and trap.duffing_xi < 0:
            waist = math.sqrt(-2.0 / trap.duffing_xi)
        else:
            waist = trap.waist_w0
        return cls(
            mass=particle_mass(particle),
            omega=effective_trap_frequency(trap, particle),
            gamma=gas_damping_rate(particle, gas),
            temperature=gas.temperature,
            force_model=force_model,
            waist=waist,
            xi=xi,
        )

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def noise_amplitude(self) -> float:
        """속도 갱신의 잡음 세기 sqrt(2 Γ_m k_B T / m)"""
        return math.sqrt(2.0 * self.gamma * self.kB * self.temperature / self.mass)

    @property
    def thermal_position_std(self) -> float:
        return math.sqrt(self.kB * self.temperature / (self.mass * self.omega**2))


class Trajectory(BaseModel):
    """단일 SDE 표본 경로. 탈출 시 첫 |x| > escape_bound 에서 잘림"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    escaped: bool = False
    seed: int = 0
    # (스냅샷 수, 2): [x, v]; 탈출 이후 스냅샷은 NaN
    snapshot_states: Optional[np.ndarray] = None
    escape_time: Optional[float] = None


class EnsembleResult(BaseModel):
    """
    스트로보스코픽 위상공간 점구름.

    snapshots[k]는 (n_k, 2) 배열 [x, p/(mω)] 이고 운동량 축은 v/ω (위치 단위)입니다.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    snapshot_times: List[float]
    snapshots: List[np.ndarray]
    snapshot_trajectories: List[np.ndarray]
    n_trajectories: int
    n_escaped: int = 0
    metadata: Dict[str, Any] = Field(default_factory=dict)
    # record_every > 0 일 때 기록된 궤적 (n_trajectories, n_records); 탈출 이후 NaN
    trace_times: Optional[np.ndarray] = None
    trace_positions: Optional[np.ndarray] = None
