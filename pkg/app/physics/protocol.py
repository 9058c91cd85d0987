import math
from typing import Tuple, Union

import numpy as np

from app.models.physics import PulseProtocol

ArrayLike = Union[float, np.ndarray]


def protocol_timing(omega_high: float, s_low: float) -> Tuple[float, float]:
    """
    고출력/저출력 구간 길이를 계산합니다.

    각 구간에서 입자가 해당 주파수로 진동의 1/4을 완료하도록 맞춥니다.

    Args:
        omega_high: 고출력 각주파수 [rad/s]
        s_low: 변조 깊이, (0, 1]

    Returns:
        (tau_high, tau_low) [s]
    """
    if omega_high <= 0:
        raise ValueError(f"omega_high는 양수여야 합니다: {omega_high}")
    if not 0 < s_low <= 1:
        raise ValueError(f"s_low는 (0, 1] 범위여야 합니다: {s_low}")
    tau_high = math.pi / (2.0 * omega_high)
    tau_low = math.pi / (2.0 * omega_high * math.sqrt(s_low))
    return tau_high, tau_low


def control_function(protocol: PulseProtocol, time: ArrayLike) -> ArrayLike:
    """
    제어 함수 S(t)를 평가합니다. 스칼라와 배열 모두 받습니다.

    t' = t mod (τ_low + τ_high) 에서 t' ∈ (0, τ_low) 이면 s_low, 그 외에는 1.
    펄스열이 끝나면 다음 시퀀스가 시작될 때까지 1을 유지합니다.
    """
    cycle = protocol.cycle
    t = np.asarray(time, dtype=float)
    if np.any(t < 0):
        raise ValueError("time은 0 이상이어야 합니다")

    train = protocol.n_pulses * cycle
    if protocol.n_sequences > 1:
        sequence_period = train + protocol.inter_sequence_delay
        in_schedule = t < protocol.n_sequences * sequence_period
        t_seq = np.where(in_schedule, np.mod(t, sequence_period), np.inf)
    else:
        t_seq = t

    t_prime = np.mod(np.where(np.isfinite(t_seq), t_seq, 0.0), cycle)
    low = (t_seq < train) & (t_prime > 0.0) & (t_prime < protocol.tau_low)
    values = np.where(low, protocol.s_low, 1.0)

    if np.ndim(time) == 0:
        return float(values)
    return values
