import math
from typing import List, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app.models.analysis import BackboneFit
from app.models.classical import Trajectory
from app.utils.errors import AnalysisError

Trace = Tuple[np.ndarray, np.ndarray]


def _as_traces(trajectories: Union[Trace, Sequence[Union[Trajectory, Trace]]]) -> List[Trace]:
    if isinstance(trajectories, tuple) and len(trajectories) == 2 and np.ndim(trajectories[0]) == 1:
        return [(np.asarray(trajectories[0], float), np.asarray(trajectories[1], float))]
    traces = []
    for item in trajectories:
        if isinstance(item, Trajectory):
            traces.append((item.times, item.positions))
        else:
            traces.append((np.asarray(item[0], float), np.asarray(item[1], float)))
    return traces


def cycle_frequencies(t: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    상향 영점 교차 사이의 한 주기마다 (A², ω) 를 구합니다.

    교차 시각은 선형 보간, A는 주기 내 max|x|.
    """
    mask = np.isfinite(x)
    t, x = t[mask], x[mask]
    idx = np.flatnonzero((x[:-1] < 0.0) & (x[1:] >= 0.0))
    if idx.size < 2:
        return np.empty(0), np.empty(0)
    crossings = t[idx] - x[idx] * (t[idx + 1] - t[idx]) / (x[idx + 1] - x[idx])
    periods = np.diff(crossings)
    amplitude_sq = np.array([np.max(np.abs(x[a + 1 : b + 1])) ** 2 for a, b in zip(idx[:-1], idx[1:])])
    return amplitude_sq, 2.0 * math.pi / periods


def duffing_backbone(
    trajectories: Union[Trace, Sequence[Union[Trajectory, Trace]]],
    n_bins: int = 8,
) -> BackboneFit:
    """
    진폭에 따른 순간 주파수로부터 Duffing 계수 ξ를 추정합니다.

    A² 구간별 평균 ω에 ω(A) = ω₀(1 + (3ξ/8)·A²) 직선을 맞추며 ξ = 8·기울기/(3·ω₀).

    Args:
        trajectories: Trajectory 목록 또는 (t, x) 쌍(들)
        n_bins: A² 구간 수

    Returns:
        BackboneFit
    """
    amplitude_sq, omega = [], []
    for t, x in _as_traces(trajectories):
        a2, w = cycle_frequencies(t, x)
        amplitude_sq.append(a2)
        omega.append(w)
    amplitude_sq = np.concatenate(amplitude_sq) if amplitude_sq else np.empty(0)
    omega = np.concatenate(omega) if omega else np.empty(0)
    if amplitude_sq.size < 2:
        raise AnalysisError("완전한 진동 주기가 부족합니다", operation="duffing_backbone")

    lo, hi = float(amplitude_sq.min()), float(amplitude_sq.max())
    if lo <= 0 or hi / lo < 1.5:
        raise AnalysisError("진폭 분포가 충분히 넓지 않습니다 (max A²/min A² < 1.5)", operation="duffing_backbone")

    edges = np.linspace(lo, hi, n_bins + 1)
    which = np.clip(np.digitize(amplitude_sq, edges) - 1, 0, n_bins - 1)
    centers, means = [], []
    for b in range(n_bins):
        sel = which == b
        if np.any(sel):
            centers.append(float(amplitude_sq[sel].mean()))
            means.append(float(omega[sel].mean()))
    if len(centers) < 2:
        raise AnalysisError("채워진 진폭 구간이 2개 미만입니다", operation="duffing_backbone")

    slope, intercept = np.polyfit(centers, means, 1)
    if intercept <= 0:
        raise AnalysisError("ω₀ 추정값이 양수가 아닙니다", operation="duffing_backbone")
    xi = 8.0 * slope / (3.0 * intercept)
    logger.info(f"Duffing 백본: ξ = {xi:.4g} 1/m², ω₀/2π = {intercept / (2 * math.pi):.6g} Hz")
    return BackboneFit(
        xi=float(xi),
        omega0=float(intercept),
        slope=float(slope),
        amplitude_sq=centers,
        omega=means,
        n_cycles=int(amplitude_sq.size),
    )
