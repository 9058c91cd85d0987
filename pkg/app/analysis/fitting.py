"""
이중 가우시안 피팅, 쌍봉성 A_D, 이완 시간 피팅.
"""
import math
from typing import List, Tuple, Union

import numpy as np
from loguru import logger
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import curve_fit, least_squares
from scipy.signal import find_peaks

from app.models.analysis import DoubleGaussianFit, Marginal, RelaxationFit
from app.utils.errors import AnalysisError

RESIDUAL_TOLERANCE = 0.1
# 단봉 판정 시 단일 가우시안이 넘지 말아야 할 잔차
UNIMODAL_TOLERANCE = 0.05
# 최댓값 대비 이 비율 이상 솟은 봉우리만 초기값으로 씀
PEAK_PROMINENCE = 0.1
SQRT_2PI = math.sqrt(2.0 * math.pi)


def _normal(u: np.ndarray, mu: float, s: float) -> np.ndarray:
    return np.exp(-0.5 * ((u - mu) / s) ** 2) / (SQRT_2PI * abs(s))


def _model(theta: np.ndarray, u: np.ndarray) -> np.ndarray:
    a1, m1, s1, a2, m2, s2 = theta
    return a1 * _normal(u, m1, s1) + a2 * _normal(u, m2, s2)


def _component_columns(a: float, m: float, s: float, u: np.ndarray) -> List[np.ndarray]:
    g = _normal(u, m, s)
    r = u - m
    return [g, a * g * r / s**2, a * g * (r**2 / s**3 - 1.0 / s)]


def _jacobian(theta: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.column_stack(_component_columns(*theta[:3], u) + _component_columns(*theta[3:], u))


def _significant_peaks(u: np.ndarray, y: np.ndarray) -> np.ndarray:
    """가볍게 평활한 곡선에서 높이 순 상위 두 봉우리 (돌출도가 작은 잡음 봉우리 제외)"""
    smoothed = gaussian_filter1d(y, sigma=max(1.0, u.size / 100.0))
    peaks, _ = find_peaks(smoothed, prominence=PEAK_PROMINENCE * float(smoothed.max()))
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(smoothed))])
    return peaks[np.argsort(smoothed[peaks])[::-1][:2]]


def _initial_guess(u: np.ndarray, peaks: np.ndarray) -> np.ndarray:
    if peaks.size == 2:
        m1, m2 = sorted(u[peaks])
        s = 0.5 * (m2 - m1)
    else:
        # 단봉: 표준편차 1 단위로 무차원화되어 있음
        m1, m2 = u[peaks[0]] - 0.25, u[peaks[0]] + 0.25
        s = 0.5
    return np.array([0.5, m1, s, 0.5, m2, s])


def _fit_single(u: np.ndarray, target: np.ndarray, center: float) -> Tuple[np.ndarray, float]:
    """단일 가우시안 LM 피팅; (a, m, s) 와 봉우리 대비 잔차 rms"""
    result = least_squares(
        lambda t: t[0] * _normal(u, t[1], t[2]) - target,
        np.array([1.0, center, 1.0]),
        jac=lambda t: np.column_stack(_component_columns(*t, u)),
        method="lm",
        xtol=1e-8,
        max_nfev=200,
    )
    return result.x, float(np.sqrt(np.mean(result.fun**2)) / np.max(target))


def fit_double_gaussian(marginal: Union[Marginal, Tuple[np.ndarray, np.ndarray]]) -> DoubleGaussianFit:
    """
    w1·N(mu1, sigma1) + w2·N(mu2, sigma2) 최소제곱 피팅.

    평균 0, 표준편차 1로 무차원화한 뒤 Levenberg–Marquardt (해석적 야코비안,
    xtol 1e-8, 최대 200회 평가) 로 맞춥니다. 초기값은 결정적입니다.
    돌출한 봉우리가 하나뿐이고 단일 가우시안 잔차가 UNIMODAL_TOLERANCE 이내이면
    mu1 = mu2 인 퇴화 해를 수렴으로 돌려줍니다.

    Args:
        marginal: Marginal 또는 (x, 밀도) 쌍

    Returns:
        DoubleGaussianFit: mu1 ≤ mu2 로 정렬된 결과
    """
    if isinstance(marginal, Marginal):
        x, y = marginal.x, marginal.density
    else:
        x, y = (np.asarray(v, dtype=float) for v in marginal)
    if x.size < 20:
        raise AnalysisError(f"지지점이 부족합니다 ({x.size} < 20)", operation="fit_double_gaussian")

    dx = float(x[1] - x[0])
    norm = float(y.sum() * dx)
    if norm <= 0:
        raise AnalysisError("주변분포의 적분이 0입니다", operation="fit_double_gaussian")
    y = y / norm
    center = float(np.sum(x * y) * dx)
    scale = math.sqrt(float(np.sum((x - center) ** 2 * y) * dx))
    if scale <= 0:
        raise AnalysisError("주변분포의 폭이 0입니다", operation="fit_double_gaussian")
    u = (x - center) / scale
    target = y * scale

    peaks = _significant_peaks(u, target)
    if peaks.size == 1:
        (a, m, s), single_rms = _fit_single(u, target, float(u[peaks[0]]))
        if a > 0 and s != 0 and single_rms <= UNIMODAL_TOLERANCE:
            # 퇴화 해: 두 성분이 같은 가우시안
            logger.debug(f"단봉 주변분포: 단일 가우시안 잔차 {single_rms:.3g}")
            return DoubleGaussianFit(
                mu1=center + scale * m,
                mu2=center + scale * m,
                sigma1=scale * abs(s),
                sigma2=scale * abs(s),
                w1=0.5,
                w2=0.5,
                residual_rms=single_rms,
                converged=True,
                message="단봉: 단일 가우시안 (퇴화 해)",
            )

    theta0 = _initial_guess(u, peaks)
    result = least_squares(
        lambda t: _model(t, u) - target,
        theta0,
        jac=lambda t: _jacobian(t, u),
        method="lm",
        xtol=1e-8,
        max_nfev=200,
    )
    if not np.all(np.isfinite(result.x)) or result.x[2] == 0 or result.x[5] == 0:
        raise AnalysisError(f"이중 가우시안 피팅 실패: {result.message}", operation="fit_double_gaussian")
    a1, m1, s1, a2, m2, s2 = result.x
    s1, s2 = abs(s1), abs(s2)
    if m1 > m2:
        a1, m1, s1, a2, m2, s2 = a2, m2, s2, a1, m1, s1

    residual_rms = float(np.sqrt(np.mean(result.fun**2)) / np.max(target))
    converged = bool(result.success and residual_rms <= RESIDUAL_TOLERANCE and a1 > 0 and a2 > 0)
    total = a1 + a2
    weight1 = float(np.clip(a1 / total, 0.0, 1.0)) if total > 0 else 0.5
    if not converged:
        logger.warning(f"이중 가우시안 피팅이 수렴하지 않았습니다: {result.message} (잔차 {residual_rms:.3g})")

    return DoubleGaussianFit(
        mu1=center + scale * m1,
        mu2=center + scale * m2,
        sigma1=scale * s1,
        sigma2=scale * s2,
        w1=weight1,
        w2=1.0 - weight1,
        residual_rms=residual_rms,
        converged=converged,
        message=str(result.message),
    )


def ashman_D(fit: DoubleGaussianFit) -> float:
    """A_D = √2·|mu1 − mu2| / sqrt(sigma1² + sigma2²); A_D > 2 이면 쌍봉"""
    if not fit.converged:
        logger.warning("수렴하지 않은 피팅으로 A_D를 계산합니다")
    return math.sqrt(2.0) * abs(fit.mu1 - fit.mu2) / math.sqrt(fit.sigma1**2 + fit.sigma2**2)


def relaxation_time(times: np.ndarray, variance: np.ndarray) -> RelaxationFit:
    """
    σ²(t) = σ²_∞ + (σ²_0 − σ²_∞)·exp(−(t − t₀)/τ) 피팅으로 τ를 구합니다.

    Args:
        times: 시각 [s]
        variance: 위치 분산 [m²]

    Returns:
        RelaxationFit
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(variance, dtype=float)
    if t.size < 4:
        raise AnalysisError("분산 시계열이 너무 짧습니다", operation="relaxation_time")
    level = float(np.max(np.abs(v)))
    if level == 0 or np.ptp(v) <= 1e-6 * level:
        raise AnalysisError("평탄한 시계열에서는 τ를 결정할 수 없습니다", operation="relaxation_time")

    span = float(t[-1] - t[0])
    s = (t - t[0]) / span
    y = v / level

    def model(s, a, b, tau):
        return a + b * np.exp(-s / tau)

    p0 = (y[-1], y[0] - y[-1], 1.0 / 3.0)
    try:
        popt, pcov = curve_fit(model, s, y, p0=p0, maxfev=5000)
    except (RuntimeError, ValueError) as e:
        logger.error(f"이완 시간 피팅 실패: {e}")
        raise AnalysisError(f"이완 시간 피팅이 수렴하지 않았습니다: {e}", operation="relaxation_time") from e

    a, b, tau = popt
    stderr = float(np.sqrt(pcov[2, 2])) if np.isfinite(pcov[2, 2]) else math.inf
    if not math.isfinite(tau) or tau <= 0 or stderr >= tau:
        raise AnalysisError(f"τ를 결정할 수 없습니다 (τ={tau * span:.3g} s)", operation="relaxation_time")

    logger.info(f"이완 시간 τ = {tau * span:.4g} s")
    return RelaxationFit(
        tau=tau * span,
        variance_initial=(a + b) * level,
        variance_final=a * level,
        tau_stderr=stderr * span,
    )
