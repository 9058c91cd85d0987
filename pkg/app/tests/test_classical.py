import math

import numpy as np
import pytest

from app.models.classical import ClassicalPhysics
from app.models.config import SimConfig
from app.models.physics import PulseProtocol
from app.simulator import (
    euler_maruyama_step,
    resolve_sim_config,
    run_ensemble,
    sample_thermal_state,
    simulate_trajectory,
    trajectory_seed,
    variance_timeseries,
)
from app.simulator.classical import control_schedule, default_time_step, exact_linear_map
from app.analysis import ashman_D, fit_double_gaussian, phase_space_density, position_marginal, relaxation_time
from app.utils.config_loader import load_config
from app.utils.errors import ConfigError, NumericalError, SimulationError

OMEGA = 2.0 * math.pi


@pytest.fixture
def noiseless_linear() -> ClassicalPhysics:
    return ClassicalPhysics(mass=1.0, omega=OMEGA, gamma=0.0, temperature=0.0, force_model="linear", kB=1.0)


def _final_state(init, protocol, cfg, physics):
    trajectory = simulate_trajectory(init, protocol, cfg, physics, seed=0)
    return trajectory.positions[-1], trajectory.velocities[-1]


@pytest.mark.parametrize("n_pulses", [1, 5, 55])
def test_linear_regime_matches_exact_map(noiseless_linear, n_pulses):
    """잡음 없는 선형 힘: 펄스 후 공분산이 구간별 조화 회전의 곱과 1% 이내로 일치"""
    protocol = PulseProtocol(s_low=0.71, n_pulses=55).with_timing(OMEGA)
    dt = noiseless_linear.period / 20000.0
    cfg = SimConfig(dt=dt, duration=n_pulses * protocol.cycle, n_trajectories=1)

    x1, v1 = _final_state((1.0, 0.0), protocol, cfg, noiseless_linear)
    x2, v2 = _final_state((0.0, OMEGA), protocol, cfg, noiseless_linear)
    # 열 단위 (x, v/ω)
    numeric = np.array([[x1, x2], [v1 / OMEGA, v2 / OMEGA]])

    n_steps = int(round(cfg.duration / dt))
    exact = exact_linear_map(control_schedule(protocol, dt, n_steps), dt, OMEGA)
    scale = np.diag([1.0, 1.0 / OMEGA])
    exact = scale @ exact @ np.linalg.inv(scale)

    cov_numeric = numeric @ numeric.T
    cov_exact = exact @ exact.T
    error = np.max(np.abs(cov_numeric - cov_exact)) / np.max(np.abs(cov_exact))
    assert error < 0.01


def test_squeezing_grows_one_quadrature(noiseless_linear):
    """펄스열은 한 사분면을 늘리고 다른 쪽을 줄임 (면적 보존)"""
    protocol = PulseProtocol(s_low=0.71, n_pulses=10).with_timing(OMEGA)
    dt = noiseless_linear.period / 4000.0
    n_steps = int(round(10 * protocol.cycle / dt))
    exact = exact_linear_map(control_schedule(protocol, dt, n_steps), dt, OMEGA)
    assert np.linalg.det(exact) == pytest.approx(1.0, rel=1e-9)
    scaled = np.diag([1.0, 1.0 / OMEGA]) @ exact @ np.diag([1.0, OMEGA])
    singular = np.linalg.svd(scaled, compute_uv=False)
    assert singular[0] > 1.5
    assert singular[0] * singular[1] == pytest.approx(1.0, rel=1e-9)


def test_euler_maruyama_step_semi_implicit(noiseless_linear):
    rng = np.random.default_rng(0)
    dt = 1e-3
    x, v = euler_maruyama_step((1.0, 0.0), dt, 1.0, noiseless_linear, rng)
    assert v == pytest.approx(-(OMEGA**2) * dt)
    assert x == pytest.approx(1.0 + dt * v)

    x, v = euler_maruyama_step((1.0, 0.0), dt, 0.5, noiseless_linear, rng, integrator="explicit")
    assert x == 1.0
    assert v == pytest.approx(-0.5 * OMEGA**2 * dt)


def test_euler_maruyama_step_nonfinite(unit_physics):
    rng = np.random.default_rng(1)
    with pytest.raises(NumericalError) as exc:
        euler_maruyama_step((1e308, 1e308), 1.0, 1.0, unit_physics, rng, seed=42, step_index=7)
    assert exc.value.seed == 42
    assert exc.value.step == 7


def test_trajectory_seed_deterministic():
    seeds = [trajectory_seed(7, i) for i in range(100)]
    assert seeds == [trajectory_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert all(0 <= s < 2**64 for s in seeds)
    assert trajectory_seed(8, 0) != seeds[0]


def test_sample_thermal_state(unit_physics):
    rng = np.random.default_rng(3)
    samples = np.array([sample_thermal_state(rng, 1.0, OMEGA, 1.0, kB=1.0) for _ in range(20000)])
    assert np.std(samples[:, 0]) == pytest.approx(1.0 / OMEGA, rel=0.03)
    assert np.std(samples[:, 1]) == pytest.approx(1.0, rel=0.03)
    assert sample_thermal_state(rng, 1.0, OMEGA, 0.0) == (0.0, 0.0)
    with pytest.raises(ValueError):
        sample_thermal_state(rng, -1.0, OMEGA, 1.0)


def test_dt_upper_bound(unit_physics, no_pulses):
    """dt > T_period/200 이면 설정 오류"""
    with pytest.raises(ConfigError) as exc:
        resolve_sim_config(SimConfig(dt=0.01, duration=1.0), unit_physics, no_pulses)
    assert exc.value.key_path == "simulation.dt"


def test_default_dt_and_pulse_snapshots(unit_physics):
    protocol = PulseProtocol(s_low=0.71, n_pulses=4).with_timing(OMEGA)
    cfg = resolve_sim_config(
        SimConfig(duration=4 * protocol.cycle, snapshot_times=[0.1], snapshot_after_pulses=[0, 4]),
        unit_physics,
        protocol,
    )
    assert cfg.dt == pytest.approx(min(1.0 / 1000.0, protocol.tau_low / 50.0))
    assert cfg.snapshot_times == pytest.approx([0.0, 0.1, 4 * protocol.cycle])
    assert math.isinf(cfg.escape_bound)

    with pytest.raises(ConfigError) as exc:
        resolve_sim_config(
            SimConfig(duration=protocol.cycle, snapshot_after_pulses=[2]), unit_physics, protocol
        )
    assert exc.value.key_path == "simulation.snapshot_after_pulses"


def test_control_schedule_midpoints():
    protocol = PulseProtocol(s_low=0.5, tau_high=1.0, tau_low=1.0, n_pulses=1)
    np.testing.assert_array_equal(control_schedule(protocol, 0.5, 4), [0.5, 0.5, 1.0, 1.0])


def test_ensemble_independent_of_thread_count(unit_physics, no_pulses):
    cfg = SimConfig(dt=1e-3, duration=1.0, n_trajectories=32, master_seed=11, snapshot_times=[0.0, 0.5, 1.0])
    single = run_ensemble(no_pulses, cfg, unit_physics, threads=1)
    pooled = run_ensemble(no_pulses, cfg, unit_physics, threads=4)
    assert len(single.snapshots) == 3
    for a, b in zip(single.snapshots, pooled.snapshots):
        assert np.array_equal(a, b)
    assert single.metadata["n_steps"] == 1000


def test_ensemble_momentum_axis_scaled(unit_physics, no_pulses):
    """스냅샷 두 번째 열은 v/ω"""
    cfg = SimConfig(dt=1e-3, duration=0.01, n_trajectories=2000, snapshot_times=[0.0])
    result = run_ensemble(no_pulses, cfg, unit_physics)
    points = result.snapshots[0]
    assert points.shape == (2000, 2)
    assert np.std(points[:, 0]) == pytest.approx(np.std(points[:, 1]), rel=0.1)


def test_equipartition(unit_physics, no_pulses):
    """S ≡ 1 평형 상태에서 ⟨x²⟩ = k_B T/(m ω²) (5% 이내)"""
    cfg = SimConfig(dt=1e-3, duration=50.0, n_trajectories=64, master_seed=5, record_every=10)
    result = run_ensemble(no_pulses, cfg, unit_physics)
    mean_square = np.nanmean(result.trace_positions**2)
    assert mean_square == pytest.approx(1.0 / OMEGA**2, rel=0.05)


def test_relaxation_of_hot_ensemble(no_pulses):
    """뜨거운 초기 앙상블의 분산은 1/Γ_m 로 이완 (20% 이내)"""
    physics = ClassicalPhysics(
        mass=1.0, omega=OMEGA, gamma=1.0, temperature=1.0, force_model="linear", kB=1.0
    )
    cfg = SimConfig(
        dt=1e-3, duration=6.0, n_trajectories=1000, master_seed=9, record_every=20, initial_temperature=4.0
    )
    result = run_ensemble(no_pulses, cfg, physics)
    centers, stds = variance_timeseries(result, window=0.5)
    fit = relaxation_time(centers, stds**2)
    assert fit.tau == pytest.approx(1.0, rel=0.2)
    assert fit.variance_final == pytest.approx(1.0 / OMEGA**2, rel=0.2)


def test_escape_truncates_trajectory():
    physics = ClassicalPhysics(
        mass=1.0, omega=OMEGA, gamma=OMEGA, temperature=5.0, force_model="gaussian", waist=0.3, kB=1.0
    )
    protocol = PulseProtocol(n_pulses=0).with_timing(OMEGA)
    cfg = SimConfig(dt=1e-3, duration=20.0, n_trajectories=1, record_every=1)
    trajectory = simulate_trajectory((0.0, 0.0), protocol, cfg, physics, seed=123)
    assert trajectory.escaped
    assert trajectory.escape_time is not None and trajectory.escape_time < 20.0
    assert np.all(np.abs(trajectory.positions) <= 0.9)
    assert trajectory.times[-1] < trajectory.escape_time


def test_majority_escape_fails():
    physics = ClassicalPhysics(
        mass=1.0, omega=OMEGA, gamma=OMEGA, temperature=5.0, force_model="gaussian", waist=0.3, kB=1.0
    )
    protocol = PulseProtocol(n_pulses=0).with_timing(OMEGA)
    cfg = SimConfig(dt=1e-3, duration=20.0, n_trajectories=20)
    with pytest.raises(SimulationError):
        run_ensemble(protocol, cfg, physics)


def test_raising_escape_bound_never_loses_survivors(unit_physics, no_pulses):
    """같은 시드에서 escape_bound 를 키우면 탈출 수가 늘지 않음"""
    counts = []
    for bound in (2.0, 2.5, 3.0, 4.0):
        cfg = SimConfig(
            dt=1e-3, duration=1.0, n_trajectories=200, master_seed=4, escape_bound=bound / OMEGA
        )
        counts.append(run_ensemble(no_pulses, cfg, unit_physics).n_escaped)
    assert counts[0] > 0
    assert all(later <= earlier for earlier, later in zip(counts, counts[1:]))


def test_hotter_initial_ensemble_escapes_more(unit_physics, no_pulses):
    counts = []
    for temperature in (0.25, 1.0, 4.0):
        cfg = SimConfig(
            dt=1e-3,
            duration=1.0,
            n_trajectories=400,
            master_seed=8,
            escape_bound=3.0 / OMEGA,
            initial_temperature=temperature,
        )
        counts.append(run_ensemble(no_pulses, cfg, unit_physics).n_escaped)
    assert counts[0] <= counts[1] <= counts[2]
    assert counts[2] > counts[0]


def _reference_setup(config_dir):
    config = load_config(config_dir / "reference_classical.cfg")
    physics = ClassicalPhysics.from_specs(
        config.particle, config.trap, config.gas, config.simulation.force_model
    )
    return config, physics


def _one_pulse_growth(protocol, omega):
    """한 주기 정확한 선형 사상의 대각합과 펄스당 성장률 acosh(|tr|/2)"""
    n_steps = 20000
    dt = protocol.cycle / n_steps
    trace = float(np.trace(exact_linear_map(control_schedule(protocol, dt, n_steps), dt, omega)))
    return trace, math.acosh(abs(trace) / 2.0)


def test_reference_pulse_timing_sets_slow_instability(config_dir):
    """측정 타이밍 τ_low = 3.48 μs: 펄스당 성장 ≈ 0.077, 공식 타이밍(≈ 0.171)의 절반 이하"""
    config, physics = _reference_setup(config_dir)
    measured = config.protocol.with_timing(physics.omega)
    formula = config.protocol.model_copy(update={"tau_low": None}).with_timing(physics.omega)
    assert measured.tau_low == pytest.approx(3.48e-6)
    assert formula.tau_low == pytest.approx(3.853e-6, rel=1e-3)

    trace, growth = _one_pulse_growth(measured, physics.omega)
    assert trace == pytest.approx(-2.006, abs=2e-3)
    assert growth == pytest.approx(0.077, abs=3e-3)
    _, formula_growth = _one_pulse_growth(formula, physics.omega)
    assert formula_growth == pytest.approx(0.171, abs=3e-3)
    assert formula_growth > 2.0 * growth


def test_reference_bimodality_converges_in_dt(config_dir):
    """잡음 없이 dt 를 반으로 줄여도 55 펄스 후 A_D 변화 < 1%"""
    config, physics = _reference_setup(config_dir)
    physics = physics.model_copy(update={"gamma": 0.0})
    protocol = config.protocol.with_timing(physics.omega)
    dt = default_time_step(physics, protocol)
    values = []
    for step in (dt, dt / 2.0):
        cfg = config.simulation.model_copy(
            update={"dt": step, "n_trajectories": 300, "snapshot_after_pulses": [55]}
        )
        result = run_ensemble(protocol, cfg, physics, threads=2)
        marginal = position_marginal(phase_space_density(result.snapshots[-1], bins=121))
        values.append(ashman_D(fit_double_gaussian(marginal)))
    assert values[0] > 2.0
    assert values[1] == pytest.approx(values[0], rel=0.01)


def test_variance_timeseries_tuple():
    times = np.arange(10) * 0.1
    positions = np.vstack([np.ones(10), -np.ones(10), np.zeros(10)])
    centers, stds = variance_timeseries((times, positions), window=0.5)
    np.testing.assert_allclose(centers, [0.25, 0.75])
    np.testing.assert_allclose(stds, [math.sqrt(2.0 / 3.0)] * 2)
    with pytest.raises(ValueError):
        variance_timeseries((times, positions), window=0.0)


def test_record_every_zero_keeps_endpoints(unit_physics, no_pulses):
    cfg = SimConfig(dt=1e-3, duration=0.5, n_trajectories=1)
    trajectory = simulate_trajectory((0.01, 0.0), no_pulses, cfg, unit_physics, seed=1)
    assert trajectory.times.tolist() == pytest.approx([0.0, 0.5])
    assert not trajectory.escaped
