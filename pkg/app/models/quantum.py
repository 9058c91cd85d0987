import math
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.physics import CONSTANTS


class QuantumGrid(BaseModel):
    """
    위치 격자. 내부 단위는 ħ = m = ω = 1 이며 길이 단위는
    L = sqrt(ħ/(mω)) = √2·Δx_zpf 입니다. SI 변환은 length_scale로 합니다.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_points: int = 512
    half_width: float = Field(gt=0)
    # L [m]
    length_scale: float = Field(default=1.0, gt=0)

    @field_validator("n_points")
    @classmethod
    def check_power_of_two(cls, v: int) -> int:
        if v < 128 or v & (v - 1):
            raise ValueError(f"n_points는 128 이상의 2의 거듭제곱이어야 합니다: {v}")
        return v

    @property
    def x_min(self) -> float:
        return -self.half_width

    @property
    def x_max(self) -> float:
        return self.half_width

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.spacing * np.arange(self.n_points)

    @property
    def p(self) -> np.ndarray:
        """FFT 순서의 공액 운동량 격자 (ħ = 1)"""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)


class InitialStateSpec(BaseModel):
    """초기 상태 종류와 파라미터 (폭·변위는 Δx_zpf 단위)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["thermal", "fock", "blurred_fock", "gaussian"]
    label: Optional[str] = None
    mean_occupation: Optional[float] = Field(default=None, ge=0)
    n: Optional[int] = Field(default=None, ge=0)
    n_center: Optional[int] = Field(default=None, ge=0)
    sigma_n: float = Field(default=5.0, gt=0)
    width: Optional[float] = Field(default=None, gt=0)
    displacement: float = 0.0

    @model_validator(mode="after")
    def check_parameters(self) -> "InitialStateSpec":
        required = {
            "thermal": "mean_occupation",
            "fock": "n",
            "blurred_fock": "n_center",
            "gaussian": "width",
        }[self.kind]
        if getattr(self, required) is None:
            raise ValueError(f"{self.kind} 상태에는 {required} 값이 필요합니다")
        return self

    @property
    def name(self) -> str:
        return self.label or self.kind

    def position_variance(self) -> float:
        """조화 근사에서의 위치 분산 (L² 단위)"""
        if self.kind == "thermal":
            return self.mean_occupation + 0.5
        if self.kind == "fock":
            return self.n + 0.5
        if self.kind == "blurred_fock":
            levels, weights = blurred_fock_weights(self.n_center, self.sigma_n)
            return float(np.sum(weights * (levels + 0.5)))
        # Δx_zpf = L/√2
        return (self.width / math.sqrt(2.0)) ** 2


def blurred_fock_weights(n_center: int, sigma_n: float, cutoff: float = 6.0) -> Tuple[np.ndarray, np.ndarray]:
    """n_center 중심의 가우시안 가중치 q_m ∝ exp(−(m−n_c)²/(2σ_n²)), 정규화"""
    lo = max(0, int(math.floor(n_center - cutoff * sigma_n)))
    hi = int(math.ceil(n_center + cutoff * sigma_n))
    levels = np.arange(lo, hi + 1)
    weights = np.exp(-((levels - n_center) ** 2) / (2.0 * sigma_n**2))
    return levels, weights / weights.sum()


class HamiltonianTerms(BaseModel):
    """분할 연산자용 해밀토니안 항: FFT 순서 운동 에너지 스펙트럼과 위치 포텐셜"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kinetic: np.ndarray
    potential: np.ndarray
    depth: float = 0.0
    waist: float = math.inf

    def harmonic_frequency(self) -> float:
        """V''(0)/m 로부터의 조화 주파수 (내부 단위)"""
        if not math.isfinite(self.waist):
            return 1.0
        return math.sqrt(4.0 * self.depth / self.waist**2)


class DensityMatrix(BaseModel):
    """위치 표현 밀도 행렬 ρ(x_i, x_j); trace·spacing = 1"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: QuantumGrid
    elements: np.ndarray

    def trace(self) -> float:
        return float(np.real(np.trace(self.elements)) * self.grid.spacing)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.elements - self.elements.conj().T)))

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.elements)).copy()

    def min_eigenvalue(self) -> float:
        """연산자 ρ·spacing의 최소 고윳값 (양의 준정부호 점검)"""
        hermitian = 0.5 * (self.elements + self.elements.conj().T)
        return float(np.linalg.eigvalsh(hermitian * self.grid.spacing)[0])

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(grid=self.grid, elements=self.elements.copy())


class WignerDistribution(BaseModel):
    """
    위상공간 Wigner 분포. x, p, values는 내부 단위(ħ = 1, 길이 L)이며
    SI 값은 *_si 속성으로 얻습니다.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray
    length_scale: float = 1.0
    time: float = 0.0

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    @property
    def cell_area(self) -> float:
        return self.dx * self.dp

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    @property
    def x_si(self) -> np.ndarray:
        return self.x * self.length_scale

    @property
    def p_si(self) -> np.ndarray:
        return self.p * CONSTANTS.hbar / self.length_scale

    @property
    def values_si(self) -> np.ndarray:
        return self.values / CONSTANTS.hbar
