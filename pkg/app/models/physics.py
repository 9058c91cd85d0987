import math
from typing import Optional

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator


class PhysicalConstants(BaseModel):
    """물리 상수 (CODATA 값, 사용자 수정 불가)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kB: float = 1.380649e-23  # J/K
    hbar: float = 1.054571817e-34  # J·s
    c: float = 2.99792458e8  # m/s
    eps0: float = 8.8541878128e-12  # F/m


CONSTANTS = PhysicalConstants()


class ParticleSpec(BaseModel):
    """포획된 나노입자의 물리 파라미터"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # 반경 [m]
    radius: float = Field(gt=0)
    # 밀도 [kg/m³], 실리카 기본값
    density: float = Field(default=2200.0, gt=0)
    # 입자 굴절률 n_p
    refractive_index: float = Field(default=1.44, ge=1.0)
    # 비유전율 ε (광자 반동 결어긋남 추정용), n_p²에 묶지 않음
    dielectric_constant: float = Field(default=2.0, ge=1.0)

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3

    @property
    def mass(self) -> float:
        return self.density * self.volume


class GasEnvironment(BaseModel):
    """배경 기체 파라미터"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # 압력 [Pa] (1 mbar = 100 Pa)
    pressure: float = Field(ge=0)
    # 온도 [K]
    temperature: float = Field(default=300.0, gt=0)
    # 유효 공기 분자 질량 [kg]
    gas_molecular_mass: float = Field(default=4.81e-26, gt=0)


class TrapSpec(BaseModel):
    """광 포획(트랩) 파라미터"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    wavelength: float = Field(default=1550e-9, gt=0)
    waist_w0: float = Field(gt=0)
    medium_index: float = Field(default=1.0, ge=1.0)
    power_high: float = Field(gt=0)
    power_low: float = Field(gt=0)
    # 스펙트럼에서 보정된 고출력 공진 주파수 [Hz]; 지정 시 공식값을 대체
    frequency_hz: Optional[float] = Field(default=None, gt=0)
    # 측정된 Duffing 계수 ξ [1/m²]; 지정 시 모델값 −2/w₀²를 대체
    duffing_xi: Optional[float] = None
    # 빔 비대칭 계수 (A_x, A_y)
    asymmetry_x: float = Field(default=1.0, gt=0)
    asymmetry_y: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def check_power_levels(self) -> "TrapSpec":
        if self.power_low > self.power_high:
            raise ValueError("power_low는 power_high 이하여야 합니다")
        return self

    @property
    def s_low(self) -> float:
        """변조 깊이 S_low = P_low / P_high"""
        return self.power_low / self.power_high


class PulseProtocol(BaseModel):
    """사각파 제어 함수 S(t)의 타이밍과 펄스 스케줄"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    s_low: float = Field(default=0.71, gt=0, lt=1)
    # None이면 protocol_timing 공식으로 채워짐 [s]
    tau_high: Optional[float] = Field(default=None, gt=0)
    tau_low: Optional[float] = Field(default=None, gt=0)
    n_pulses: int = Field(default=55, ge=0)
    n_sequences: int = Field(default=1, ge=1)
    inter_sequence_delay: float = Field(default=0.0, ge=0)

    @property
    def is_resolved(self) -> bool:
        return self.tau_high is not None and self.tau_low is not None

    @property
    def cycle(self) -> float:
        """펄스 한 주기 τ_low + τ_high"""
        if not self.is_resolved:
            raise ValueError("펄스 타이밍이 결정되지 않았습니다 (tau_high/tau_low)")
        return self.tau_low + self.tau_high

    @property
    def train_duration(self) -> float:
        return self.n_pulses * self.cycle

    def with_timing(self, omega_high: float) -> "PulseProtocol":
        """비어 있는 τ를 공식 값으로 채운 프로토콜을 반환합니다."""
        from app.physics.protocol import protocol_timing

        tau_high, tau_low = protocol_timing(omega_high, self.s_low)
        resolved = self.model_copy(
            update={
                "tau_high": self.tau_high if self.tau_high is not None else tau_high,
                "tau_low": self.tau_low if self.tau_low is not None else tau_low,
            }
        )
        logger.debug(
            f"펄스 타이밍 결정: tau_high={resolved.tau_high:.6g} s, tau_low={resolved.tau_low:.6g} s"
        )
        return resolved

    def scaled(self, time_unit: float) -> "PulseProtocol":
        """시간을 time_unit 단위로 무차원화한 프로토콜 (양자 계산용, ω=1)"""
        return self.model_copy(
            update={
                "tau_high": self.tau_high / time_unit,
                "tau_low": self.tau_low / time_unit,
                "inter_sequence_delay": self.inter_sequence_delay / time_unit,
            }
        )


class DecoherenceSpec(BaseModel):
    """광자 반동 결어긋남: Λ [Hz/m²] 또는 무차원 Γ/ω 중 하나"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda_recoil: Optional[float] = Field(default=None, ge=0)
    gamma_over_omega: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def check_exactly_one(self) -> "DecoherenceSpec":
        if (self.lambda_recoil is None) == (self.gamma_over_omega is None):
            raise ValueError("lambda_recoil 과 gamma_over_omega 중 정확히 하나를 지정해야 합니다")
        return self

    def to_gamma_over_omega(self, dx_zpf: float, omega: float) -> float:
        if self.gamma_over_omega is not None:
            return self.gamma_over_omega
        return self.lambda_recoil * dx_zpf**2 / omega

    def to_lambda(self, dx_zpf: float, omega: float) -> float:
        if self.lambda_recoil is not None:
            return self.lambda_recoil
        return self.gamma_over_omega * omega / dx_zpf**2
