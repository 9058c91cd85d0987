"""
Wigner 변환과 위상공간 진단량 (음수성, 순도, 주변분포, Fock 점유).
"""
import math
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import fft as sp_fft
from scipy.signal import resample

from app.models.quantum import DensityMatrix, QuantumGrid, WignerDistribution
from app.simulator.quantum import hermite_functions
from app.utils.errors import GridError

IMAGINARY_TOLERANCE = 1e-10


def _oversampled(rho: DensityMatrix, factor: int) -> Tuple[np.ndarray, np.ndarray, float]:
    grid = rho.grid
    if factor == 1:
        return rho.elements, grid.x, grid.spacing
    n = grid.n_points * factor
    elements = resample(resample(rho.elements, n, axis=0), n, axis=1)
    spacing = grid.spacing / factor
    x = grid.x_min + spacing * np.arange(n)
    return elements, x, spacing


def wigner_transform(rho: DensityMatrix, oversample: int = 1, time: float = 0.0) -> WignerDistribution:
    """
    W(x,p) = (1/πħ) ∫dy ρ(x+y, x−y) e^{−2ipy/ħ}.

    반대각선 ρ[i+k, i−k] 를 모은 뒤 k 축으로 FFT 합니다. 운동량 격자는
    p_j = j·π/(N·dx) 이며 표현 가능한 범위는 ±π/(2dx) 이므로 oversample > 1 이면
    ρ를 Fourier 보간해 범위를 넓힙니다.
    """
    if oversample < 1:
        raise ValueError("oversample은 1 이상이어야 합니다")
    elements, x, dx = _oversampled(rho, oversample)
    n = x.size

    i = np.arange(n)[:, None]
    k = np.arange(-n // 2, n // 2)[None, :]
    a, b = i + k, i - k
    valid = (a >= 0) & (a < n) & (b >= 0) & (b < n)
    anti_diagonal = np.where(valid, elements[np.clip(a, 0, n - 1), np.clip(b, 0, n - 1)], 0.0)

    spectrum = sp_fft.fftshift(sp_fft.fft(sp_fft.ifftshift(anti_diagonal, axes=1), axis=1), axes=1)
    spectrum *= dx / math.pi

    peak = float(np.max(np.abs(spectrum.real)))
    residue = float(np.max(np.abs(spectrum.imag)))
    if residue > IMAGINARY_TOLERANCE * max(peak, 1e-300):
        raise GridError(
            f"Wigner 분포의 허수 잔여 {residue:.3e} 가 허용치를 넘습니다",
            operation="wigner_transform",
        )

    p = np.arange(-n // 2, n // 2) * math.pi / (n * dx)
    return WignerDistribution(
        x=x,
        p=p,
        values=np.ascontiguousarray(spectrum.real),
        length_scale=rho.grid.length_scale,
        time=time,
    )


def wigner_negativity(W: WignerDistribution) -> float:
    """N = Σ_{W<0} W·dx·dp (0 이하)"""
    negative = W.values[W.values < 0.0]
    return float(negative.sum() * W.cell_area)


def negativity_increment(history: Sequence[Union[WignerDistribution, float]]) -> np.ndarray:
    """ΔN(t) = |N(t)| − |N(0)|; 양수이면 음수성이 늘어난 것"""
    if len(history) < 2:
        raise ValueError("negativity_increment에는 2개 이상의 스냅샷이 필요합니다")
    values = np.array(
        [wigner_negativity(h) if isinstance(h, WignerDistribution) else float(h) for h in history]
    )
    return np.abs(values) - abs(values[0])


def purity(rho: DensityMatrix) -> float:
    """Tr(ρ²)·spacing²"""
    return float(np.sum(np.abs(rho.elements) ** 2) * rho.grid.spacing**2)


def marginal_wigner_x(W: WignerDistribution) -> Tuple[np.ndarray, np.ndarray]:
    """p에 대해 적분한 W_x(x)"""
    return W.x.copy(), W.values.sum(axis=1) * W.dp


def fock_populations(rho: DensityMatrix, n_max: int) -> np.ndarray:
    """
    조화 근사 고유상태에 대한 점유 P(n) = ⟨n|ρ|n⟩·spacing².

    ψ_{n_max} 가 격자 가장자리에서 감쇠하지 않으면 GridError.
    """
    grid: QuantumGrid = rho.grid
    basis = hermite_functions(grid.x, n_max)
    edge = max(basis[-1, 0] ** 2, basis[-1, -1] ** 2)
    if edge > 1e-10 * float(np.max(basis[-1] ** 2)):
        raise GridError(
            f"n_max={n_max} 고유상태가 격자(반폭 {grid.half_width:.3g} L)에 담기지 않습니다",
            operation="fock_populations",
        )
    projected = basis @ rho.elements
    return np.real(np.sum(projected * basis, axis=1)) * grid.spacing**2
