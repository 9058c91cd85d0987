from typing import Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.ndimage import gaussian_filter

from app.models.analysis import Marginal, PhaseSpaceDistribution
from app.utils.errors import AnalysisError

Bandwidth = Union[None, float, Tuple[float, float]]


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman 규칙 0.9·min(σ, IQR/1.34)·n^(−1/5)"""
    n = values.size
    if n < 2:
        return 0.0
    sigma = float(np.std(values))
    q75, q25 = np.percentile(values, [75, 25])
    spread = min(sigma, (q75 - q25) / 1.34) if q75 > q25 else sigma
    return 0.9 * spread * n ** (-0.2)


def _default_half_width(values: np.ndarray) -> float:
    half_width = max(4.0 * float(np.std(values)), 1.001 * float(np.max(np.abs(values))))
    return half_width if half_width > 0 else 1e-9


def phase_space_density(
    points: np.ndarray,
    bins: int = 121,
    half_width: Optional[Sequence[float]] = None,
    bandwidth: Bandwidth = None,
) -> PhaseSpaceDistribution:
    """
    점구름으로부터 정규화된 2차원 위상공간 밀도를 만듭니다.

    Args:
        points: (n, 2) 배열 [x, p/(mω)]
        bins: 축별 칸 수 (홀수이면 원점에 칸 중심)
        half_width: (x, p) 격자 반폭; None이면 축별 max(4σ, 1.001·max|값|)
        bandwidth: 가우시안 커널 폭; None이면 축별 Silverman, 0이면 원시 히스토그램

    Returns:
        PhaseSpaceDistribution
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] == 0:
        raise AnalysisError("points는 (n, 2) 배열이어야 합니다", operation="phase_space_density")
    n = points.shape[0]
    if n < 10:
        logger.warning(f"점 개수가 적습니다 ({n} < 10)")

    x, p = points[:, 0], points[:, 1]
    if half_width is None:
        half_width = (_default_half_width(x), _default_half_width(p))
    hx, hp = float(half_width[0]), float(half_width[1])

    outside = int(np.count_nonzero((np.abs(x) > hx) | (np.abs(p) > hp)))
    if outside:
        raise AnalysisError(f"격자 밖의 점 {outside}개", operation="phase_space_density")

    x_edges = np.linspace(-hx, hx, bins + 1)
    p_edges = np.linspace(-hp, hp, bins + 1)
    hist, _, _ = np.histogram2d(x, p, bins=[x_edges, p_edges])

    if bandwidth is None:
        bw = (silverman_bandwidth(x), silverman_bandwidth(p))
    elif np.isscalar(bandwidth):
        bw = (float(bandwidth), float(bandwidth))
    else:
        bw = (float(bandwidth[0]), float(bandwidth[1]))

    dx, dp = x_edges[1] - x_edges[0], p_edges[1] - p_edges[0]
    if bw[0] > 0 or bw[1] > 0:
        hist = gaussian_filter(hist, sigma=(bw[0] / dx, bw[1] / dp), mode="constant")

    density = hist / (hist.sum() * dx * dp)
    return PhaseSpaceDistribution(x_edges=x_edges, p_edges=p_edges, density=density, bandwidth=bw, n_points=n)


def position_marginal(d: PhaseSpaceDistribution) -> Marginal:
    """운동량 축으로 합한 위치 확률 밀도 (적분 1)"""
    dx = d.x_edges[1] - d.x_edges[0]
    dp = d.p_edges[1] - d.p_edges[0]
    values = d.density.sum(axis=1) * dp
    values = values / (values.sum() * dx)
    return Marginal(x=d.x_centers, density=values)
