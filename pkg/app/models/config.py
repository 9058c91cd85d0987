from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.physics import (
    DecoherenceSpec,
    GasEnvironment,
    ParticleSpec,
    PulseProtocol,
    TrapSpec,
)
from app.models.quantum import InitialStateSpec


class SimConfig(BaseModel):
    """고전 Langevin 앙상블 시뮬레이션 설정 ([simulation] 섹션)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # None이면 min(T_period/1000, tau_low/50)
    dt: Optional[float] = Field(default=None, gt=0)
    duration: float = Field(gt=0)
    snapshot_times: List[float] = Field(default_factory=list)
    # k번째 펄스 직후 스냅샷: t = k·(τ_low + τ_high)
    snapshot_after_pulses: List[int] = Field(default_factory=list)
    n_trajectories: int = Field(default=689, ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2**64)
    # None이면 3·w_eff
    escape_bound: Optional[float] = Field(default=None, gt=0)
    force_model: Literal["gaussian", "duffing", "linear"] = "gaussian"
    integrator: Literal["semi_implicit", "explicit"] = "semi_implicit"
    # 0이면 궤적 전체를 저장하지 않음
    record_every: int = Field(default=0, ge=0)
    # None이면 기체 온도로 초기 열상태 샘플링
    initial_temperature: Optional[float] = Field(default=None, ge=0)
    chunk_steps: int = Field(default=65536, ge=1024)

    @field_validator("snapshot_times")
    @classmethod
    def check_sorted(cls, v: List[float]) -> List[float]:
        if any(t < 0 for t in v):
            raise ValueError("snapshot_times는 0 이상이어야 합니다")
        if any(b < a for a, b in zip(v, v[1:])):
            raise ValueError("snapshot_times는 오름차순이어야 합니다")
        return v

    @model_validator(mode="after")
    def check_within_duration(self) -> "SimConfig":
        if self.snapshot_times and self.snapshot_times[-1] > self.duration:
            raise ValueError("snapshot_times는 duration 이내여야 합니다")
        return self


class QuantumSettings(BaseModel):
    """양자 밀도 행렬 시뮬레이션 설정 ([quantum] 섹션)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    frequency_hz: float = Field(default=80e3, gt=0)
    # U₀ / ħω
    depth_ratio: float = Field(default=100.0, gt=0)
    potential: Literal["gaussian", "harmonic"] = "gaussian"
    n_points: int = 512
    # 격자 반폭 (L = sqrt(ħ/mω) 단위); None이면 max(6·초기 표준편차, 1.2·w₀)
    half_width: Optional[float] = Field(default=None, gt=0)
    steps_per_period: int = Field(default=2000, ge=500)
    duration: float = Field(default=2.75, gt=0)
    duration_unit: Literal["periods", "radians"] = "periods"
    snapshot_every: int = Field(default=100, ge=1)
    check_every: int = Field(default=50, ge=1)
    positivity_every: int = Field(default=1000, ge=1)
    wigner_oversample: int = Field(default=1, ge=1, le=4)
    fock_n_max: int = Field(default=60, ge=0)
    save_wigner: Literal["ends", "all"] = "ends"
    # 축당 점 수가 이 값 이하인 Wigner 스냅샷은 CSV 로도 저장 (0 이면 끔)
    wigner_csv_max_points: int = Field(default=256, ge=0)
    decoherence: DecoherenceSpec = Field(default_factory=lambda: DecoherenceSpec(gamma_over_omega=1e-5))
    initial_states: List[InitialStateSpec] = Field(min_length=1)


class AnalysisSettings(BaseModel):
    """측정/시뮬레이션 데이터 분석 설정 ([analysis] 섹션)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    input: Optional[Path] = None
    psd: bool = False
    backbone: bool = False
    bimodality: bool = True
    bins: int = Field(default=121, ge=3)
    # None이면 축별 Silverman 규칙, 0이면 원시 히스토그램
    bandwidth: Optional[float] = Field(default=None, ge=0)
    snapshot_index: Optional[int] = Field(default=None, ge=0)
    nperseg: int = Field(default=4096, ge=64)
    backbone_bins: int = Field(default=8, ge=2)
    variance_window: Optional[float] = Field(default=None, gt=0)

    @field_validator("bins")
    @classmethod
    def check_odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError("bins는 홀수여야 합니다 (원점에 bin 중심)")
        return v


class CalibrationSettings(BaseModel):
    """보정 실행 설정 ([calibration] 섹션): S≡1, 고압 평형 상태"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # 5 mbar
    pressure: float = Field(default=500.0, gt=0)
    n_trajectories: int = Field(default=16, ge=1)
    periods: float = Field(default=4000.0, gt=100)
    steps_per_period: int = Field(default=200, ge=200)
    record_every: int = Field(default=10, ge=1)
    nperseg: int = Field(default=4096, ge=64)


REQUIRED_SECTIONS = {
    "classical": ("particle", "gas", "trap", "protocol", "simulation"),
    "quantum": ("particle", "protocol", "quantum"),
    "calibrate": ("particle", "gas", "trap"),
    "analyze": ("analysis",),
}


class RunConfig(BaseModel):
    """실행 설정 전체"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["classical", "quantum", "analyze", "calibrate"]
    master_seed: int = Field(default=0, ge=0, lt=2**64)
    output_dir: Path = Path("output")
    particle: Optional[ParticleSpec] = None
    gas: Optional[GasEnvironment] = None
    trap: Optional[TrapSpec] = None
    protocol: Optional[PulseProtocol] = None
    simulation: Optional[SimConfig] = None
    quantum: Optional[QuantumSettings] = None
    analysis: Optional[AnalysisSettings] = None
    calibration: Optional[CalibrationSettings] = None

    @model_validator(mode="after")
    def check_required_sections(self) -> "RunConfig":
        missing = [name for name in REQUIRED_SECTIONS[self.kind] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"'{self.kind}' 실행에 필요한 섹션이 없습니다: {', '.join(missing)}")
        if self.kind == "analyze" and self.analysis.input is None:
            raise ValueError("analyze 실행에는 analysis.input 이 필요합니다")
        return self
