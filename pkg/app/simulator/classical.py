"""
펄스 프로토콜 하의 1차원 Langevin 방정식 적분.

v ← v + dt·(−Γ_m v + S·F(x)/m) + sqrt(2Γ_m k_B T/m)·sqrt(dt)·n
x ← x + dt·v        (semi-implicit: 새 v 사용, explicit: 이전 v 사용)
"""
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from numba import njit

from app.models.classical import ClassicalPhysics, EnsembleResult, Trajectory
from app.models.config import SimConfig
from app.models.physics import PulseProtocol
from app.physics.protocol import control_function
from app.utils.errors import ConfigError, NumericalError, SimulationError

FORCE_CODES = {"linear": 0, "duffing": 1, "gaussian": 2}

STATUS_OK = 0
STATUS_ESCAPED = 1
STATUS_NONFINITE = 2


@njit(nogil=True)
def _acceleration(x, s, omega2, force_code, shape):
    if force_code == 2:
        # shape = 1/w²
        return -s * omega2 * x * np.exp(-2.0 * x * x * shape)
    if force_code == 1:
        # shape = ξ
        return -s * omega2 * (x + shape * x * x * x)
    return -s * omega2 * x


@njit(nogil=True)
def _step(x, v, dt, s, omega2, force_code, shape, gamma, kick, semi_implicit):
    if semi_implicit:
        v_new = v + dt * (-gamma * v + _acceleration(x, s, omega2, force_code, shape)) + kick
        x_new = x + dt * v_new
    else:
        a = _acceleration(x, s, omega2, force_code, shape)
        x_new = x + dt * v
        v_new = v + dt * (-gamma * v + a) + kick
    return x_new, v_new


@njit(nogil=True)
def _integrate_chunk(
    x, v, dt, s_values, omega2, force_code, shape, gamma, kicks, semi_implicit, escape_bound, out_x, out_v
):
    n = s_values.shape[0]
    for i in range(n):
        x, v = _step(x, v, dt, s_values[i], omega2, force_code, shape, gamma, kicks[i], semi_implicit)
        out_x[i] = x
        out_v[i] = v
        if not (np.isfinite(x) and np.isfinite(v)):
            return i, STATUS_NONFINITE
        if abs(x) > escape_bound:
            return i, STATUS_ESCAPED
    return n, STATUS_OK


def _shape_parameter(physics: ClassicalPhysics) -> float:
    if physics.force_model == "gaussian":
        return 0.0 if math.isinf(physics.waist) else 1.0 / physics.waist**2
    if physics.force_model == "duffing":
        return physics.xi
    return 0.0


def trajectory_seed(master_seed: int, index: int) -> int:
    """
    궤적별 64비트 시드.

    SeedSequence(entropy=master_seed, spawn_key=(index,))의 첫 uint64 상태 워드이며
    실행 순서나 스레드 수와 무관합니다.
    """
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def sample_thermal_state(
    rng: np.random.Generator, m: float, omega: float, T: float, kB: float = 1.380649e-23
) -> Tuple[float, float]:
    """열상태에서 (x, v)를 독립적으로 샘플링합니다. T = 0이면 (0, 0)."""
    if m <= 0 or omega <= 0 or T < 0:
        raise ValueError("m, omega는 양수, T는 0 이상이어야 합니다")
    sigma_x = math.sqrt(kB * T / (m * omega**2))
    sigma_v = math.sqrt(kB * T / m)
    x = float(rng.normal(0.0, sigma_x))
    v = float(rng.normal(0.0, sigma_v))
    return x, v


def euler_maruyama_step(
    state: Tuple[float, float],
    dt: float,
    S: float,
    physics: ClassicalPhysics,
    rng: np.random.Generator,
    integrator: str = "semi_implicit",
    seed: Optional[int] = None,
    step_index: int = 0,
) -> Tuple[float, float]:
    """
    Euler–Maruyama 한 스텝.

    Args:
        state: (x [m], v [m/s])
        dt: 시간 간격 [s]
        S: 제어 함수 값
        physics: 해석된 물리량
        rng: 이 궤적의 난수 스트림

    Returns:
        (x, v) 갱신값
    """
    kick = physics.noise_amplitude * math.sqrt(dt) * float(rng.standard_normal())
    x, v = _step(
        float(state[0]),
        float(state[1]),
        dt,
        float(S),
        physics.omega**2,
        FORCE_CODES[physics.force_model],
        _shape_parameter(physics),
        physics.gamma,
        kick,
        integrator == "semi_implicit",
    )
    if not (math.isfinite(x) and math.isfinite(v)):
        raise NumericalError(
            f"유한하지 않은 상태 (seed={seed}, step={step_index})",
            seed=seed,
            step=step_index,
            module="classical-sim",
            operation="euler_maruyama_step",
        )
    return x, v


def default_time_step(physics: ClassicalPhysics, protocol: PulseProtocol) -> float:
    """min(T_period/1000, tau_low/50)"""
    dt = physics.period / 1000.0
    if protocol.n_pulses > 0:
        dt = min(dt, protocol.tau_low / 50.0)
    return dt


def default_escape_bound(physics: ClassicalPhysics) -> float:
    """3·w_eff; 허리가 정의되지 않으면 무한대"""
    if physics.force_model == "gaussian" and math.isfinite(physics.waist):
        return 3.0 * physics.waist
    if physics.force_model == "duffing" and physics.xi < 0:
        return 3.0 * math.sqrt(-2.0 / physics.xi)
    return math.inf


def resolve_sim_config(cfg: SimConfig, physics: ClassicalPhysics, protocol: PulseProtocol) -> SimConfig:
    """기본값(dt, escape_bound, 펄스 기준 스냅샷)을 채우고 dt 상한을 검사합니다."""
    dt = cfg.dt if cfg.dt is not None else default_time_step(physics, protocol)
    if dt > physics.period / 200.0 * (1.0 + 1e-12):
        raise ConfigError(
            f"simulation.dt: dt={dt:.3e} s 가 T_period/200 = {physics.period / 200.0:.3e} s 를 넘습니다",
            key_path="simulation.dt",
        )

    times = list(cfg.snapshot_times)
    if cfg.snapshot_after_pulses:
        times += [k * protocol.cycle for k in cfg.snapshot_after_pulses]
    times = sorted(set(times))
    if times and times[-1] > cfg.duration * (1.0 + 1e-12):
        raise ConfigError(
            "simulation.snapshot_after_pulses: 스냅샷 시각이 duration을 넘습니다",
            key_path="simulation.snapshot_after_pulses",
        )

    escape_bound = cfg.escape_bound if cfg.escape_bound is not None else default_escape_bound(physics)
    return cfg.model_copy(update={"dt": dt, "snapshot_times": times, "escape_bound": escape_bound})


def control_schedule(protocol: PulseProtocol, dt: float, n_steps: int) -> np.ndarray:
    """스텝별 S 값 (각 스텝의 중간 시각에서 평가)"""
    midpoints = (np.arange(n_steps) + 0.5) * dt
    return np.asarray(control_function(protocol, midpoints), dtype=float)


def _n_steps(cfg: SimConfig) -> int:
    return int(round(cfg.duration / cfg.dt))


def simulate_trajectory(
    init: Tuple[float, float],
    protocol: PulseProtocol,
    cfg: SimConfig,
    physics: ClassicalPhysics,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    schedule: Optional[np.ndarray] = None,
) -> Trajectory:
    """
    t = 0부터 duration까지 궤적 하나를 적분합니다.

    Args:
        init: 초기 (x, v)
        protocol: 타이밍이 결정된 펄스 프로토콜
        cfg: 시뮬레이션 설정 (dt 등이 비어 있으면 채움)
        physics: 해석된 물리량
        seed: 난수 시드 (rng가 없을 때 사용)
        rng: 이미 생성된 난수 스트림
        schedule: 미리 계산한 스텝별 S 값

    Returns:
        Trajectory: 기록된 시각/위치/속도와 스냅샷 상태
    """
    if cfg.dt is None or cfg.escape_bound is None:
        cfg = resolve_sim_config(cfg, physics, protocol)
    if rng is None:
        rng = np.random.default_rng(seed)
    dt = cfg.dt
    n_steps = _n_steps(cfg)
    if schedule is None:
        schedule = control_schedule(protocol, dt, n_steps)

    snapshot_steps = np.clip(np.rint(np.asarray(cfg.snapshot_times) / dt).astype(np.int64), 0, n_steps)
    snapshot_states = np.full((len(snapshot_steps), 2), np.nan)
    record_every = cfg.record_every

    x, v = float(init[0]), float(init[1])
    rec_idx: List[np.ndarray] = [np.array([0])]
    rec_x: List[np.ndarray] = [np.array([x])]
    rec_v: List[np.ndarray] = [np.array([v])]
    snapshot_states[snapshot_steps == 0] = (x, v)

    omega2 = physics.omega**2
    force_code = FORCE_CODES[physics.force_model]
    shape = _shape_parameter(physics)
    kick_scale = physics.noise_amplitude * math.sqrt(dt)
    semi_implicit = cfg.integrator == "semi_implicit"
    out_x = np.empty(min(cfg.chunk_steps, max(n_steps, 1)))
    out_v = np.empty_like(out_x)

    escaped = False
    escape_time = None
    last_index = 0
    base = 0
    while base < n_steps:
        length = min(cfg.chunk_steps, n_steps - base)
        if kick_scale > 0:
            kicks = kick_scale * rng.standard_normal(length)
        else:
            kicks = np.zeros(length)
        count, status = _integrate_chunk(
            x, v, dt, schedule[base : base + length], omega2, force_code, shape,
            physics.gamma, kicks, semi_implicit, cfg.escape_bound, out_x, out_v,
        )
        if status == STATUS_NONFINITE:
            raise NumericalError(
                f"유한하지 않은 상태 (seed={seed}, step={base + count + 1})",
                seed=seed,
                step=base + count + 1,
                module="classical-sim",
                operation="simulate_trajectory",
            )
        # 탈출한 경우 탈출 직전 상태까지만 유효
        valid = count if status == STATUS_ESCAPED else length
        indices = base + 1 + np.arange(valid)
        if valid > 0:
            keep = (indices % record_every == 0) if record_every > 0 else np.zeros(valid, dtype=bool)
            rec_idx.append(indices[keep])
            rec_x.append(out_x[:valid][keep].copy())
            rec_v.append(out_v[:valid][keep].copy())
            in_chunk = (snapshot_steps >= base + 1) & (snapshot_steps < base + 1 + valid)
            local = snapshot_steps[in_chunk] - base - 1
            snapshot_states[in_chunk, 0] = out_x[local]
            snapshot_states[in_chunk, 1] = out_v[local]
            last_index = int(indices[-1])
            x, v = float(out_x[valid - 1]), float(out_v[valid - 1])
        if status == STATUS_ESCAPED:
            escaped = True
            escape_time = (base + count + 1) * dt
            logger.debug(f"궤적 탈출 (seed={seed}, t={escape_time:.6g} s)")
            break
        base += length

    indices = np.concatenate(rec_idx)
    positions = np.concatenate(rec_x)
    velocities = np.concatenate(rec_v)
    if record_every == 0 and last_index > 0:
        indices = np.append(indices, last_index)
        positions = np.append(positions, x)
        velocities = np.append(velocities, v)

    return Trajectory(
        times=indices * dt,
        positions=positions,
        velocities=velocities,
        escaped=escaped,
        seed=int(seed) if seed is not None else 0,
        snapshot_states=snapshot_states,
        escape_time=escape_time,
    )


def run_ensemble(
    protocol: PulseProtocol,
    cfg: SimConfig,
    physics: ClassicalPhysics,
    threads: int = 1,
) -> EnsembleResult:
    """
    독립 궤적 n_trajectories개를 적분해 스냅샷 점구름을 모읍니다.

    궤적별 시드는 master_seed와 인덱스로부터 결정되므로 결과는 스레드 수와 무관합니다.
    """
    cfg = resolve_sim_config(cfg, physics, protocol)
    n_steps = _n_steps(cfg)
    schedule = control_schedule(protocol, cfg.dt, n_steps)
    init_temperature = cfg.initial_temperature if cfg.initial_temperature is not None else physics.temperature

    logger.info(
        f"앙상블 시작: {cfg.n_trajectories}개 궤적, {n_steps}스텝 (dt={cfg.dt:.4g} s), "
        f"힘 모델={physics.force_model}, 스레드={threads}"
    )
    started = time.perf_counter()

    def work(index: int) -> Trajectory:
        seed = trajectory_seed(cfg.master_seed, index)
        rng = np.random.default_rng(seed)
        init = sample_thermal_state(rng, physics.mass, physics.omega, init_temperature, physics.kB)
        return simulate_trajectory(init, protocol, cfg, physics, seed=seed, rng=rng, schedule=schedule)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajectories = list(pool.map(work, range(cfg.n_trajectories)))
    else:
        trajectories = [work(i) for i in range(cfg.n_trajectories)]

    n_escaped = sum(t.escaped for t in trajectories)
    if n_escaped:
        logger.warning(f"탈출한 궤적: {n_escaped}/{cfg.n_trajectories}")
    if n_escaped > 0.5 * cfg.n_trajectories:
        raise SimulationError(
            f"궤적의 50% 이상이 탈출했습니다 ({n_escaped}/{cfg.n_trajectories})",
            module="classical-sim",
            operation="run_ensemble",
        )

    snapshots = []
    snapshot_trajectories = []
    states = np.stack([t.snapshot_states for t in trajectories]) if trajectories else np.empty((0, 0, 2))
    for k in range(len(cfg.snapshot_times)):
        alive = np.isfinite(states[:, k, 0])
        points = np.column_stack([states[alive, k, 0], states[alive, k, 1] / physics.omega])
        snapshots.append(points)
        snapshot_trajectories.append(np.flatnonzero(alive))

    trace_times = None
    trace_positions = None
    if cfg.record_every > 0:
        trace_times = np.arange(0, n_steps + 1, cfg.record_every) * cfg.dt
        trace_positions = np.full((cfg.n_trajectories, trace_times.size), np.nan)
        for i, t in enumerate(trajectories):
            trace_positions[i, : t.positions.size] = t.positions

    elapsed = time.perf_counter() - started
    logger.info(f"앙상블 완료: {elapsed:.2f} s, 탈출 {n_escaped}개")

    metadata = {
        "simulation": cfg.model_dump(mode="json"),
        "physics": physics.model_dump(mode="json"),
        "protocol": protocol.model_dump(mode="json"),
        "n_steps": n_steps,
        "n_escaped": n_escaped,
        "seed_derivation": "SeedSequence(entropy=master_seed, spawn_key=(index,)).generate_state(1, uint64)[0]",
        "wall_time_s": elapsed,
    }
    return EnsembleResult(
        snapshot_times=list(cfg.snapshot_times),
        snapshots=snapshots,
        snapshot_trajectories=snapshot_trajectories,
        n_trajectories=cfg.n_trajectories,
        n_escaped=n_escaped,
        metadata=metadata,
        trace_times=trace_times,
        trace_positions=trace_positions,
    )


def variance_timeseries(
    data: Union[EnsembleResult, Sequence[Trajectory], Tuple[np.ndarray, np.ndarray]],
    window: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    시간 창별 앙상블 위치 표준편차.

    Args:
        data: 궤적이 기록된 EnsembleResult, Trajectory 목록, 또는 (times, positions[n_traj, n_t])
        window: 창 길이 [s]

    Returns:
        (창 중심 시각, std_x); 표본이 2개 미만인 창은 건너뜀
    """
    if window <= 0:
        raise ValueError("window는 양수여야 합니다")
    if isinstance(data, EnsembleResult):
        if data.trace_positions is None:
            raise ValueError("궤적이 기록되지 않은 앙상블입니다 (simulation.record_every > 0 필요)")
        times, positions = data.trace_times, data.trace_positions
    elif isinstance(data, tuple):
        times, positions = np.asarray(data[0]), np.atleast_2d(np.asarray(data[1]))
    else:
        times = np.concatenate([t.times for t in data])
        flat = np.concatenate([t.positions for t in data])
        order = np.argsort(times, kind="stable")
        times, positions = times[order], flat[order][None, :]

    bins = np.floor((times - times[0]) / window).astype(np.int64)
    centers, stds = [], []
    for b in np.unique(bins):
        columns = bins == b
        values = positions[:, columns].ravel()
        values = values[np.isfinite(values)]
        if values.size < 2:
            continue
        centers.append(times[0] + (b + 0.5) * window)
        stds.append(float(np.std(values)))
    return np.asarray(centers), np.asarray(stds)


def exact_linear_map(schedule: np.ndarray, dt: float, omega: float) -> np.ndarray:
    """
    구간별 상수 주파수 ω√S 조화 진동자의 정확한 (x, v) 전달 행렬.

    schedule은 스텝별 S 값이며 같은 값이 이어지는 구간을 하나의 회전으로 묶습니다.
    """
    matrix = np.eye(2)
    if schedule.size == 0:
        return matrix
    change = np.flatnonzero(np.diff(schedule)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [schedule.size]])
    for start, end in zip(starts, ends):
        w = omega * math.sqrt(schedule[start])
        tau = (end - start) * dt
        c, s = math.cos(w * tau), math.sin(w * tau)
        segment = np.array([[c, s / w], [-w * s, c]])
        matrix = segment @ matrix
    return matrix
