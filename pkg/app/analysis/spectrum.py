import math

import numpy as np
from loguru import logger
from scipy.optimize import curve_fit
from scipy.signal import welch

from app.models.analysis import SpectrumFit
from app.utils.errors import AnalysisError

PEAK_THRESHOLD = 10.0
MIN_PERIODS = 100


def _lorentzian(u, a, u0, g, b):
    return a / ((u**2 - u0**2) ** 2 + g**2 * u**2) + b


def psd_lorentzian_calibration(x: np.ndarray, sample_rate: float, nperseg: int = 4096) -> SpectrumFit:
    """
    Welch PSD에 감쇠 진동자 스펙트럼 A/((ω²−ω₀²)² + Γ²ω²) + B 를 맞춥니다.

    주파수는 피크 주파수로, PSD는 최댓값으로 정규화해 피팅하므로 결과는
    궤적 진폭의 배율과 무관합니다.

    Args:
        x: 등간격 위치 시계열
        sample_rate: 샘플링 주파수 [Hz]
        nperseg: Welch 구간 길이

    Returns:
        SpectrumFit (omega0 [rad/s], gamma [1/s])
    """
    x = np.asarray(x, dtype=float)
    if x.size < 16 or not np.all(np.isfinite(x)):
        raise AnalysisError("시계열이 너무 짧거나 유한하지 않은 값이 있습니다", operation="psd_lorentzian_calibration")

    freqs, power = welch(x - x.mean(), fs=sample_rate, nperseg=min(nperseg, x.size))
    freqs, power = freqs[1:], power[1:]
    k = int(np.argmax(power))
    median = float(np.median(power))
    ratio = power[k] / median if median > 0 else math.inf
    if not np.isfinite(ratio) or ratio < PEAK_THRESHOLD or power[k] <= 0:
        raise AnalysisError(
            f"배경 위로 피크가 없습니다 (피크/중앙값 = {ratio:.3g})", operation="psd_lorentzian_calibration"
        )

    omega_peak = 2.0 * math.pi * freqs[k]
    duration = x.size / sample_rate
    if duration * freqs[k] < MIN_PERIODS:
        raise AnalysisError(
            f"시계열이 {MIN_PERIODS} 주기보다 짧습니다 ({duration * freqs[k]:.1f} 주기)",
            operation="psd_lorentzian_calibration",
        )

    u = 2.0 * math.pi * freqs / omega_peak
    y = power / power[k]
    du = u[1] - u[0]

    # 반치폭 ≈ Γ
    above = y >= 0.5
    lo = k
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = k
    while hi < y.size - 1 and above[hi + 1]:
        hi += 1
    g0 = max((hi - lo + 1) * du, 2.0 * du)
    b0 = float(np.median(y))

    window = (u > 0.2) & (u < 2.0)
    try:
        popt, pcov = curve_fit(
            _lorentzian, u[window], y[window], p0=(g0**2 * (1.0 - b0), 1.0, g0, b0), maxfev=20000
        )
    except (RuntimeError, ValueError) as e:
        logger.error(f"Lorentzian 피팅 실패: {e}")
        raise AnalysisError(f"Lorentzian 피팅이 수렴하지 않았습니다: {e}", operation="psd_lorentzian_calibration") from e

    a, u0, g, b = popt
    u0, g = abs(u0), abs(g)
    if not (np.all(np.isfinite(popt)) and u0 > 0 and g > 0):
        raise AnalysisError("Lorentzian 피팅 결과가 유효하지 않습니다", operation="psd_lorentzian_calibration")

    jac = np.diag([power[k] * omega_peak**4, omega_peak, omega_peak, power[k]])
    covariance = jac @ pcov @ jac if np.all(np.isfinite(pcov)) else np.full((4, 4), np.nan)
    # 파라미터 순서 (omega0, gamma, amplitude, background)
    order = [1, 2, 0, 3]
    covariance = covariance[np.ix_(order, order)]

    fit = SpectrumFit(
        omega0=u0 * omega_peak,
        gamma=g * omega_peak,
        amplitude=a * power[k] * omega_peak**4,
        background=b * power[k],
        covariance=covariance.tolist(),
        peak_to_background=float(ratio),
    )
    logger.info(f"PSD 피팅: ω₀/2π = {fit.frequency_hz:.6g} Hz, Γ = {fit.gamma:.4g} 1/s")
    return fit
