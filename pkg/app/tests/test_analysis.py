import math

import numpy as np
import pytest

from app.analysis import (
    ashman_D,
    duffing_backbone,
    fit_double_gaussian,
    phase_space_density,
    position_marginal,
    psd_lorentzian_calibration,
    relaxation_time,
)
from app.analysis.backbone import cycle_frequencies
from app.analysis.phase_space import silverman_bandwidth
from app.models.analysis import DoubleGaussianFit
from app.models.classical import ClassicalPhysics
from app.models.config import SimConfig
from app.models.physics import PulseProtocol
from app.simulator import simulate_trajectory
from app.utils.errors import AnalysisError

OMEGA = 2.0 * math.pi


def _normal(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (math.sqrt(2 * math.pi) * sigma)


def _fit(mu1, mu2, sigma1, sigma2):
    return DoubleGaussianFit(mu1=mu1, mu2=mu2, sigma1=sigma1, sigma2=sigma2, w1=0.5, w2=0.5)


def test_ashman_d_exact():
    """mu = 0/2, sigma = 1/1 이면 A_D = 2"""
    assert ashman_D(_fit(0.0, 2.0, 1.0, 1.0)) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("scale,shift", [(1e-7, 0.0), (3.0, -5.0), (1e4, 1e4)])
def test_ashman_d_invariance(scale, shift):
    base = ashman_D(_fit(0.0, 2.0, 1.0, 1.5))
    moved = ashman_D(_fit(shift, shift + 2.0 * scale, scale, 1.5 * scale))
    assert moved == pytest.approx(base, rel=1e-12)


def test_double_gaussian_fit_bimodal():
    x = np.linspace(-6.0, 10.0, 321)
    y = 0.4 * _normal(x, 0.0, 1.0) + 0.6 * _normal(x, 4.0, 1.2)
    fit = fit_double_gaussian((x, y))
    assert fit.converged
    assert fit.mu1 == pytest.approx(0.0, abs=1e-4)
    assert fit.mu2 == pytest.approx(4.0, abs=1e-4)
    assert fit.sigma1 == pytest.approx(1.0, rel=1e-4)
    assert fit.sigma2 == pytest.approx(1.2, rel=1e-4)
    assert fit.w1 == pytest.approx(0.4, abs=1e-4)
    assert ashman_D(fit) > 2.0


def test_double_gaussian_fit_scale_invariant():
    """나노미터 규모 입력도 같은 A_D"""
    x = np.linspace(-6.0, 10.0, 321)
    y = 0.5 * _normal(x, 0.0, 1.0) + 0.5 * _normal(x, 3.5, 1.0)
    reference = ashman_D(fit_double_gaussian((x, y)))
    scaled = ashman_D(fit_double_gaussian((x * 1e-8, y / 1e-8)))
    assert scaled == pytest.approx(reference, rel=1e-6)


def test_double_gaussian_fit_unimodal():
    """단봉 분포는 A_D < 1"""
    x = np.linspace(-6.0, 6.0, 241)
    fit = fit_double_gaussian((x, _normal(x, 0.0, 1.0)))
    assert fit.mu1 <= fit.mu2
    assert ashman_D(fit) < 1.0


def test_double_gaussian_fit_thermal_snapshot_is_degenerate():
    """689점 열평형 점구름: 수렴한 퇴화 해, mu1 ≈ mu2"""
    sigma = 1.26e-8
    points = np.random.default_rng(3).standard_normal((689, 2)) * sigma
    fit = fit_double_gaussian(position_marginal(phase_space_density(points, bins=121)))
    assert fit.converged is True
    assert abs(fit.mu1 - fit.mu2) < max(fit.sigma1, fit.sigma2) / 10.0
    assert fit.sigma1 == pytest.approx(sigma, rel=0.3)
    assert ashman_D(fit) < 0.1


def test_double_gaussian_converged_is_plain_bool():
    x = np.linspace(-6.0, 10.0, 321)
    fit = fit_double_gaussian((x, 0.5 * _normal(x, 0.0, 1.0) + 0.5 * _normal(x, 3.5, 1.0)))
    assert type(fit.converged) is bool
    assert fit.model_dump(mode="json")["converged"] is True


def test_double_gaussian_needs_support():
    with pytest.raises(AnalysisError):
        fit_double_gaussian((np.linspace(0, 1, 10), np.ones(10)))
    with pytest.raises(AnalysisError):
        fit_double_gaussian((np.linspace(0, 1, 50), np.zeros(50)))


def test_phase_space_density_normalized():
    rng = np.random.default_rng(0)
    points = rng.normal(0.0, 1e-8, size=(5000, 2))
    density = phase_space_density(points, bins=61)
    assert density.density.shape == (61, 61)
    assert density.density.sum() * density.cell_area == pytest.approx(1.0, rel=1e-12)
    # 홀수 bin 은 원점에 칸 중심
    assert density.x_centers[30] == pytest.approx(0.0, abs=1e-20)
    assert density.bandwidth[0] == pytest.approx(silverman_bandwidth(points[:, 0]))

    marginal = position_marginal(density)
    assert marginal.integral() == pytest.approx(1.0, rel=1e-12)
    assert np.sum(marginal.x * marginal.density) * marginal.dx == pytest.approx(0.0, abs=1e-9)


def test_phase_space_density_raw_histogram():
    points = np.array([[0.0, 0.0], [0.5, 0.5]])
    density = phase_space_density(points, bins=3, half_width=(1.0, 1.0), bandwidth=0.0)
    assert density.bandwidth == (0.0, 0.0)
    assert np.count_nonzero(density.density) == 2


def test_phase_space_density_points_outside_grid():
    points = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, -3.0]])
    with pytest.raises(AnalysisError, match="2"):
        phase_space_density(points, half_width=(1.0, 1.0))


def test_phase_space_density_shape_checked():
    with pytest.raises(AnalysisError):
        phase_space_density(np.zeros((5, 3)))


def test_relaxation_time_synthetic():
    t = np.linspace(0.0, 0.1, 60)
    variance = 1.0 + 3.0 * np.exp(-t / 0.02)
    fit = relaxation_time(t, variance)
    assert fit.tau == pytest.approx(0.02, rel=1e-6)
    assert fit.variance_final == pytest.approx(1.0, rel=1e-6)
    assert fit.variance_initial == pytest.approx(4.0, rel=1e-6)


def test_relaxation_time_flat_series():
    with pytest.raises(AnalysisError):
        relaxation_time(np.linspace(0, 1, 20), np.full(20, 2.0))


def _thermal_trace(omega, gamma, seconds, record_every=10):
    physics = ClassicalPhysics(mass=1.0, omega=omega, gamma=gamma, temperature=1.0, force_model="linear", kB=1.0)
    protocol = PulseProtocol(n_pulses=0).with_timing(omega)
    dt = physics.period / 200.0
    cfg = SimConfig(dt=dt, duration=seconds, n_trajectories=1, record_every=record_every)
    trajectory = simulate_trajectory((0.0, 0.0), protocol, cfg, physics, seed=2024)
    return trajectory.times, trajectory.positions, 1.0 / (dt * record_every)


def test_psd_lorentzian_recovers_parameters():
    """ω₀ 1% 이내, Γ 10% 이내"""
    omega0, gamma = 2 * math.pi * 100.0, 100.0
    _, x, fs = _thermal_trace(omega0, gamma, seconds=60.0)
    fit = psd_lorentzian_calibration(x, fs, nperseg=4096)
    assert fit.omega0 == pytest.approx(omega0, rel=0.01)
    assert fit.gamma == pytest.approx(gamma, rel=0.10)
    assert fit.frequency_hz == pytest.approx(100.0, rel=0.01)
    assert len(fit.covariance) == 4
    assert fit.peak_to_background > 10


def test_psd_fit_invariant_to_amplitude_scale():
    """미터 단위로 1e-9 배 한 궤적도 같은 ω₀, Γ"""
    _, x, fs = _thermal_trace(2 * math.pi * 100.0, 100.0, seconds=30.0)
    reference = psd_lorentzian_calibration(x, fs, nperseg=4096)
    scaled = psd_lorentzian_calibration(1e-9 * x, fs, nperseg=4096)
    assert scaled.omega0 == pytest.approx(reference.omega0, rel=1e-6)
    assert scaled.gamma == pytest.approx(reference.gamma, rel=1e-6)


def test_psd_white_noise_has_no_peak():
    rng = np.random.default_rng(1)
    with pytest.raises(AnalysisError, match="피크"):
        psd_lorentzian_calibration(rng.standard_normal(2**17), 1e4, nperseg=1024)


def test_psd_requires_many_periods():
    t = np.arange(4096) / 1000.0
    with pytest.raises(AnalysisError):
        psd_lorentzian_calibration(np.sin(2 * math.pi * 10.0 * t), 1000.0, nperseg=1024)


def test_cycle_frequencies_of_sine():
    t = np.linspace(0.0, 10.0, 100001)
    amplitude_sq, omega = cycle_frequencies(t, 0.5 * np.sin(OMEGA * t - 0.3))
    assert omega.size >= 8
    np.testing.assert_allclose(omega, OMEGA, rtol=1e-6)
    np.testing.assert_allclose(amplitude_sq, 0.25, rtol=1e-4)


def test_duffing_backbone_recovers_xi():
    """감쇠하는 Duffing 진동의 진폭-주파수 곡선에서 ξ 를 10% 이내로 추정"""
    xi = -0.05
    physics = ClassicalPhysics(
        mass=1.0, omega=OMEGA, gamma=0.02, temperature=0.0, force_model="duffing", xi=xi, kB=1.0
    )
    protocol = PulseProtocol(n_pulses=0).with_timing(OMEGA)
    cfg = SimConfig(dt=1e-3, duration=40.0, n_trajectories=1, record_every=1)
    trajectory = simulate_trajectory((1.0, 0.0), protocol, cfg, physics, seed=0)
    fit = duffing_backbone([trajectory], n_bins=6)
    assert fit.xi == pytest.approx(xi, rel=0.10)
    assert fit.omega0 == pytest.approx(OMEGA, rel=1e-3)
    assert fit.n_cycles >= 30


def _ringdown(physics):
    protocol = PulseProtocol(n_pulses=0).with_timing(OMEGA)
    cfg = SimConfig(dt=1e-3, duration=40.0, n_trajectories=1, record_every=1)
    return simulate_trajectory((1.0, 0.0), protocol, cfg, physics, seed=0)


def test_duffing_backbone_harmonic_has_no_shift():
    physics = ClassicalPhysics(mass=1.0, omega=OMEGA, gamma=0.02, temperature=0.0, force_model="linear", kB=1.0)
    fit = duffing_backbone([_ringdown(physics)], n_bins=6)
    assert abs(fit.xi) < 5e-3


def test_duffing_backbone_gaussian_softens():
    """가우시안 우물은 진폭이 클수록 느려짐: ξ ≈ −2/w²"""
    waist = 4.0
    physics = ClassicalPhysics(
        mass=1.0, omega=OMEGA, gamma=0.02, temperature=0.0, force_model="gaussian", waist=waist, kB=1.0
    )
    fit = duffing_backbone([_ringdown(physics)], n_bins=6)
    assert fit.xi < 0
    assert fit.xi == pytest.approx(-2.0 / waist**2, rel=0.1)


def test_duffing_backbone_needs_amplitude_spread():
    t = np.linspace(0.0, 20.0, 200001)
    with pytest.raises(AnalysisError):
        duffing_backbone((t, np.sin(OMEGA * t)))
