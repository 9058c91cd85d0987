from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class PhaseSpaceDistribution(BaseModel):
    """
    2차원 위상공간 밀도. 운동량 축은 p/(mω) (위치 단위)입니다.

    density[i, j] 는 x_edges[i]..x_edges[i+1], p_edges[j]..p_edges[j+1] 칸의 값이며
    Σ density·dx·dp = 1 입니다.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    x_edges: np.ndarray
    p_edges: np.ndarray
    density: np.ndarray
    # (x축, p축) 커널 폭 [m]; 0이면 원시 히스토그램
    bandwidth: Tuple[float, float] = (0.0, 0.0)
    n_points: int = 0

    @property
    def x_centers(self) -> np.ndarray:
        return 0.5 * (self.x_edges[1:] + self.x_edges[:-1])

    @property
    def p_centers(self) -> np.ndarray:
        return 0.5 * (self.p_edges[1:] + self.p_edges[:-1])

    @property
    def cell_area(self) -> float:
        return float((self.x_edges[1] - self.x_edges[0]) * (self.p_edges[1] - self.p_edges[0]))


class Marginal(BaseModel):
    """위치 확률 밀도 (x, p_x)"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    density: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def integral(self) -> float:
        return float(self.density.sum() * self.dx)


class DoubleGaussianFit(BaseModel):
    """w1·N(mu1, sigma1) + w2·N(mu2, sigma2), mu1 ≤ mu2"""

    model_config = ConfigDict(frozen=True)

    mu1: float
    mu2: float
    sigma1: float = Field(gt=0)
    sigma2: float = Field(gt=0)
    w1: float = Field(ge=0, le=1)
    w2: float = Field(ge=0, le=1)
    # 피크 높이 대비 잔차 rms
    residual_rms: float = 0.0
    converged: bool = True
    message: str = ""

    @model_validator(mode="after")
    def check_canonical(self) -> "DoubleGaussianFit":
        if self.mu1 > self.mu2:
            raise ValueError("mu1 ≤ mu2 순서여야 합니다")
        if abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ValueError("w1 + w2 = 1 이어야 합니다")
        return self


class SpectrumFit(BaseModel):
    """Lorentzian PSD 피팅 결과"""

    model_config = ConfigDict(frozen=True)

    omega0: float = Field(gt=0)
    gamma: float = Field(gt=0)
    amplitude: float
    background: float
    # 파라미터 순서 (omega0, gamma, amplitude, background)
    covariance: List[List[float]] = Field(default_factory=list)
    peak_to_background: float = 0.0

    @property
    def frequency_hz(self) -> float:
        return self.omega0 / (2.0 * np.pi)


class RelaxationFit(BaseModel):
    """σ²(t) = σ²_∞ + (σ²_0 − σ²_∞)·exp(−t/τ)"""

    model_config = ConfigDict(frozen=True)

    tau: float = Field(gt=0)
    variance_initial: float
    variance_final: float
    tau_stderr: Optional[float] = None


class BackboneFit(BaseModel):
    """ω(A) = ω₀(1 + (3ξ/8)·A²) 피팅 결과"""

    model_config = ConfigDict(frozen=True)

    xi: float
    omega0: float = Field(gt=0)
    slope: float
    amplitude_sq: List[float] = Field(default_factory=list)
    omega: List[float] = Field(default_factory=list)
    n_cycles: int = 0
