"""
위치 격자 밀도 행렬의 분할 연산자 전파.

내부 단위는 ħ = m = ω = 1 이며 길이는 L = sqrt(ħ/(mω)) 단위입니다.
"""
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import fft as sp_fft

from app.models.physics import CONSTANTS, ParticleSpec, PulseProtocol
from app.models.quantum import (
    DensityMatrix,
    HamiltonianTerms,
    InitialStateSpec,
    QuantumGrid,
    blurred_fock_weights,
)
from app.physics.protocol import control_function
from app.physics.trap import particle_mass
from app.utils.errors import GridError, NumericalError

TAIL_TOLERANCE = 1e-12
TRACE_TOLERANCE = 1e-9
HERMITICITY_TOLERANCE = 1e-8
POSITIVITY_TOLERANCE = -1e-6

SnapshotCallback = Callable[[int, float, DensityMatrix], None]


def length_scale(particle: ParticleSpec, frequency_hz: float) -> float:
    """L = sqrt(ħ/(mω)) [m]"""
    omega = 2.0 * math.pi * frequency_hz
    return math.sqrt(CONSTANTS.hbar / (particle_mass(particle) * omega))


def gaussian_waist(depth_ratio: float) -> float:
    """V''(0) = 1 이 되는 허리 w₀ = sqrt(4·U₀/ħω) (L 단위)"""
    return math.sqrt(4.0 * depth_ratio)


def build_hamiltonian_terms(
    grid: QuantumGrid,
    depth: float,
    waist: float,
    mass: float = 1.0,
    potential: str = "gaussian",
    p_expected: Optional[float] = None,
) -> HamiltonianTerms:
    """
    운동 에너지 스펙트럼과 포텐셜 샘플을 만듭니다.

    Args:
        grid: 위치 격자
        depth: U₀ (ħω 단위)
        waist: w₀ (L 단위)
        mass: 질량 (내부 단위에서 1)
        potential: "gaussian" 은 −U₀ exp(−2x²/w₀²), "harmonic" 은 x²/2
        p_expected: 상태의 예상 최대 운동량; 주어지면 spacing ≤ (π/4)/p_expected 를 검사

    Returns:
        HamiltonianTerms
    """
    dx = grid.spacing
    if potential == "gaussian":
        if dx > waist / 32.0:
            raise GridError(
                f"격자 간격 {dx:.4g} 가 w₀/32 = {waist / 32.0:.4g} 보다 큽니다",
                operation="build_hamiltonian_terms",
            )
        values = -depth * np.exp(-2.0 * grid.x**2 / waist**2)
    elif potential == "harmonic":
        values = 0.5 * grid.x**2
        depth, waist = 0.0, math.inf
    else:
        raise ValueError(f"알 수 없는 포텐셜: {potential}")

    if p_expected is not None and dx > (math.pi / 4.0) / p_expected:
        raise GridError(
            f"격자 간격 {dx:.4g} 가 운동량 {p_expected:.4g} 를 해상하지 못합니다",
            operation="build_hamiltonian_terms",
        )

    kinetic = grid.p**2 / (2.0 * mass)
    return HamiltonianTerms(kinetic=kinetic, potential=values, depth=depth, waist=waist)


def default_grid(
    states: Sequence[InitialStateSpec],
    waist: float,
    n_points: int = 512,
    half_width: Optional[float] = None,
    scale: float = 1.0,
) -> QuantumGrid:
    """반폭 max(6·초기 표준편차, 1.2·w₀) 의 대칭 격자"""
    if half_width is None:
        std = max(math.sqrt(s.position_variance()) + abs(s.displacement) / math.sqrt(2.0) for s in states)
        half_width = 6.0 * std
        if math.isfinite(waist):
            half_width = max(half_width, 1.2 * waist)
    return QuantumGrid(n_points=n_points, half_width=half_width, length_scale=scale)


def hermite_functions(x: np.ndarray, n_max: int) -> np.ndarray:
    """
    정규화된 조화 진동자 고유함수 ψ₀..ψ_{n_max} (행 단위).

    ψ_{n+1} = sqrt(2/(n+1))·x·ψ_n − sqrt(n/(n+1))·ψ_{n−1}
    """
    psi = np.zeros((n_max + 1, x.size))
    psi[0] = math.pi**-0.25 * np.exp(-0.5 * x**2)
    if n_max >= 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for n in range(1, n_max):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * x * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def _fock_mixture(grid: QuantumGrid, levels: np.ndarray, weights: np.ndarray, scale: float) -> np.ndarray:
    psi = hermite_functions(grid.x * scale, int(levels.max()))[levels] * math.sqrt(scale)
    return (psi.T * weights) @ psi


def prepare_initial_state(
    spec: InitialStateSpec,
    grid: QuantumGrid,
    m: float = 1.0,
    omega: float = 1.0,
) -> DensityMatrix:
    """
    초기 밀도 행렬을 만듭니다. 조화 근사 고유상태를 기준으로 합니다.

    Args:
        spec: 초기 상태 종류와 파라미터
        grid: 위치 격자
        m, omega: 질량과 각주파수 (내부 단위에서 1)

    Returns:
        trace·spacing = 1 로 정규화된 DensityMatrix
    """
    scale = math.sqrt(m * omega)
    x = grid.x * scale

    if spec.kind == "thermal":
        # Mehler 핵: Σ P(n)|n⟩⟨n| 의 닫힌 형태
        var = spec.mean_occupation + 0.5
        xs, ys = x[:, None], x[None, :]
        rho = np.exp(-((xs + ys) ** 2) / (8.0 * var) - (xs - ys) ** 2 * var / 2.0)
        rho /= math.sqrt(2.0 * math.pi * var)
    elif spec.kind == "fock":
        rho = _fock_mixture(grid, np.array([spec.n]), np.array([1.0]), scale)
    elif spec.kind == "blurred_fock":
        levels, weights = blurred_fock_weights(spec.n_center, spec.sigma_n)
        rho = _fock_mixture(grid, levels, weights, scale)
    else:
        # 폭·변위는 Δx_zpf = L/√2 단위
        sigma = spec.width / math.sqrt(2.0)
        center = spec.displacement / math.sqrt(2.0)
        psi = np.exp(-((x - center) ** 2) / (4.0 * sigma**2))
        rho = np.outer(psi, psi)

    rho = rho.astype(complex)
    diagonal = np.real(np.diag(rho))
    peak = diagonal.max()
    if peak <= 0 or max(diagonal[0], diagonal[-1]) > TAIL_TOLERANCE * peak:
        raise GridError(
            f"{spec.name} 상태가 격자 가장자리에서 충분히 감쇠하지 않습니다 (반폭 {grid.half_width:.3g} L)",
            operation="prepare_initial_state",
        )
    rho /= diagonal.sum() * grid.spacing
    logger.debug(f"초기 상태 준비: {spec.name}, 격자 {grid.n_points}점")
    return DensityMatrix(grid=grid, elements=rho)


def _kinetic_half_step(rho: np.ndarray, phase: np.ndarray, workers: int) -> np.ndarray:
    # U ρ U†,  U = F⁻¹·diag(D)·F
    a = sp_fft.fft(rho, axis=0, workers=workers)
    a = sp_fft.ifft(a, axis=1, workers=workers)
    a *= phase
    a = sp_fft.ifft(a, axis=0, workers=workers)
    return sp_fft.fft(a, axis=1, workers=workers)


def propagate(
    rho: DensityMatrix,
    protocol: PulseProtocol,
    t_final: float,
    decoherence: float,
    dt: float,
    terms: HamiltonianTerms,
    snapshot_every: int = 0,
    callback: Optional[SnapshotCallback] = None,
    keep_snapshots: bool = False,
    check_every: int = 50,
    positivity_every: int = 1000,
    workers: int = 1,
) -> Tuple[DensityMatrix, List[Tuple[float, DensityMatrix]]]:
    """
    Strang 분할로 마스터 방정식을 전파합니다.

    반 스텝 운동 → 포텐셜·결어긋남 (위치 표현에서 대각) → 반 스텝 운동.

    Args:
        rho: 초기 밀도 행렬
        protocol: 내부 시간 단위로 환산된 펄스 프로토콜
        t_final: 전파 시간 (내부 단위)
        decoherence: Λ (내부 단위, L⁻²·ω)
        dt: 시간 간격 (내부 단위)
        terms: build_hamiltonian_terms 결과
        snapshot_every: k 스텝마다 callback 호출 (0이면 처음과 끝만)
        callback: (step, t, rho) 를 받는 함수
        keep_snapshots: 스냅샷 사본을 반환 목록에 보관

    Returns:
        (최종 DensityMatrix, [(t, DensityMatrix)] 스냅샷 목록)
    """
    period = 2.0 * math.pi / terms.harmonic_frequency()
    if dt > period / 500.0 * (1.0 + 1e-12):
        raise GridError(f"dt={dt:.4g} 가 T_period/500 을 넘습니다", operation="propagate")
    if decoherence < 0:
        raise ValueError("decoherence는 0 이상이어야 합니다")

    grid = rho.grid
    n_steps = int(round(t_final / dt))
    schedule = np.asarray(control_function(protocol, (np.arange(n_steps) + 0.5) * dt), dtype=float)

    d = np.exp(-1j * terms.kinetic * dt / 2.0)
    kinetic_phase = d[:, None] * np.conj(d)[None, :]
    x = grid.x
    separation = (x[:, None] - x[None, :]) ** 2
    potential_diff = terms.potential[:, None] - terms.potential[None, :]
    damping = np.exp(-decoherence * separation * dt)
    factors = {}

    state = rho.elements.astype(complex, copy=True)
    snapshots: List[Tuple[float, DensityMatrix]] = []

    def emit(step: int) -> None:
        t = step * dt
        current = DensityMatrix(grid=grid, elements=state)
        if callback is not None:
            callback(step, t, current)
        if keep_snapshots:
            snapshots.append((t, current.copy()))

    emit(0)
    logger.info(f"양자 전파 시작: {n_steps}스텝, dt={dt:.4g}, Λ={decoherence:.3g}")
    for step in range(1, n_steps + 1):
        s = schedule[step - 1]
        factor = factors.get(s)
        if factor is None:
            factor = np.exp(-1j * s * potential_diff * dt) * damping
            factors[s] = factor
        state = _kinetic_half_step(state, kinetic_phase, workers)
        state *= factor
        state = _kinetic_half_step(state, kinetic_phase, workers)

        if step % check_every == 0 or step == n_steps:
            _check_invariants(state, grid.spacing, step)
            state = 0.5 * (state + state.conj().T)
        if step % positivity_every == 0:
            current = DensityMatrix(grid=grid, elements=state)
            smallest = current.min_eigenvalue()
            logger.debug(f"step {step}: 최소 고윳값 {smallest:.3e}")
            if smallest < POSITIVITY_TOLERANCE:
                raise NumericalError(
                    f"양의 준정부호 위반: 최소 고윳값 {smallest:.3e} (step={step})",
                    step=step,
                    module="quantum-sim",
                    operation="propagate",
                )
        if (snapshot_every and step % snapshot_every == 0) or step == n_steps:
            emit(step)

    return DensityMatrix(grid=grid, elements=state), snapshots


def _check_invariants(state: np.ndarray, spacing: float, step: int) -> None:
    trace = float(np.real(np.trace(state)) * spacing)
    scale = float(np.max(np.abs(state)))
    hermiticity = float(np.max(np.abs(state - state.conj().T))) / scale
    if not math.isfinite(trace) or abs(trace - 1.0) > TRACE_TOLERANCE or hermiticity > HERMITICITY_TOLERANCE:
        raise NumericalError(
            f"불변량 이탈 (step={step}): trace={trace:.12g}, 에르미트 오차={hermiticity:.3e}",
            step=step,
            module="quantum-sim",
            operation="propagate",
        )
