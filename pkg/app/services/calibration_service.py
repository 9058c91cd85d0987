import math
from typing import Any, Dict

import numpy as np
from loguru import logger

from app.analysis import psd_lorentzian_calibration
from app.models.classical import ClassicalPhysics
from app.models.config import CalibrationSettings, SimConfig
from app.models.physics import CONSTANTS, PulseProtocol
from app.physics import (
    duffing_coefficient,
    fock_position_std,
    gas_damping_rate,
    particle_mass,
    protocol_timing,
    recoil_decoherence_constant,
    recoil_rate,
    thermal_position_std,
    trap_depth,
    trap_frequency,
    zero_point_fluctuation,
)
from app.services.base_service import BaseService
from app.simulator import run_ensemble
from app.utils.errors import AnalysisError

FOCK_LEVELS = (0, 20, 100)


class CalibrationService(BaseService):
    """
    보정 파이프라인.

    S ≡ 1, 보정 압력(기본 5 mbar)에서 평형 궤적을 만들고 등분배, PSD Lorentzian
    피팅, 질량 추정을 점검한 뒤 닫힌 형태 물리량 보고서를 씁니다.
    """

    kind = "calibrate"

    def execute(self) -> Dict[str, Any]:
        report = {"closed_form": self.closed_form_report(), "equilibrium": self._equilibrium_run()}
        self.writer.write_json("calibration.json", report)
        return report

    def closed_form_report(self) -> Dict[str, Any]:
        """설정 파라미터로 계산한 닫힌 형태 물리량"""
        config = self.config
        particle, trap, gas = config.particle, config.trap, config.gas
        physics = ClassicalPhysics.from_specs(particle, trap, gas)
        mass = particle_mass(particle)
        omega = physics.omega
        gamma = gas_damping_rate(particle, gas)
        tau_high, tau_low = protocol_timing(omega, (config.protocol.s_low if config.protocol else trap.s_low))
        dx_zpf = zero_point_fluctuation(mass, omega)
        lam = recoil_decoherence_constant(trap, particle, trap.power_high)
        rate = recoil_rate(lam, dx_zpf)
        depth = trap_depth(trap, particle, trap.power_high)

        report = {
            "mass_kg": mass,
            "omega_rad_s": omega,
            "frequency_hz": omega / (2.0 * math.pi),
            "frequency_formula_hz": trap_frequency(trap, particle, trap.power_high) / (2.0 * math.pi),
            "trap_depth_J": depth,
            "depth_over_hbar_omega": depth / (CONSTANTS.hbar * omega),
            "gas_damping_rate_1_s": gamma,
            "relaxation_time_s": 1.0 / gamma if gamma > 0 else None,
            "tau_high_s": tau_high,
            "tau_low_s": tau_low,
            # 설정에서 덮어쓴 τ_low (없으면 공식 값)
            "tau_low_configured_s": config.protocol.tau_low if config.protocol and config.protocol.tau_low else tau_low,
            "duffing_xi_1_m2": duffing_coefficient(trap),
            "thermal_position_std_m": thermal_position_std(mass, omega, gas.temperature),
            "dx_zpf_m": dx_zpf,
            "fock_position_std_m": {str(n): fock_position_std(n, mass, omega) for n in FOCK_LEVELS},
            "lambda_recoil_hz_m2": lam,
            "recoil_rate_hz": rate,
            "recoil_gamma_over_omega": rate / omega,
        }
        logger.info(
            f"닫힌 형태: m = {mass:.4g} kg, ω/2π = {report['frequency_hz']:.6g} Hz, Γ_m = {gamma:.4g} 1/s, "
            f"τ_high = {tau_high:.4g} s, τ_low = {tau_low:.4g} s, Λ = {lam:.4g} Hz/m²"
        )
        return report

    def _equilibrium_run(self) -> Dict[str, Any]:
        config = self.config
        settings = config.calibration or CalibrationSettings()
        gas = config.gas.model_copy(update={"pressure": settings.pressure})
        force_model = config.simulation.force_model if config.simulation else "gaussian"
        physics = ClassicalPhysics.from_specs(config.particle, config.trap, gas, force_model)

        protocol = PulseProtocol(n_pulses=0).with_timing(physics.omega)
        dt = physics.period / settings.steps_per_period
        sim = SimConfig(
            dt=dt,
            duration=settings.periods * physics.period,
            n_trajectories=settings.n_trajectories,
            master_seed=config.master_seed,
            force_model=force_model,
            record_every=settings.record_every,
        )
        logger.info(
            f"보정 실행: P = {settings.pressure} Pa, {settings.n_trajectories}개 궤적 × {settings.periods} 주기"
        )
        result = run_ensemble(protocol, sim, physics, threads=self.threads)
        positions = result.trace_positions

        mean_square = float(np.nanmean(positions**2))
        expected = physics.thermal_position_std**2
        sample_rate = 1.0 / (dt * settings.record_every)

        fits = []
        for i, trace in enumerate(positions):
            trace = trace[np.isfinite(trace)]
            try:
                fits.append(psd_lorentzian_calibration(trace, sample_rate, nperseg=settings.nperseg))
            except AnalysisError as e:
                logger.warning(f"궤적 {i} PSD 피팅 실패: {e}")
        report: Dict[str, Any] = {
            "pressure_pa": settings.pressure,
            "omega_true_rad_s": physics.omega,
            "gamma_true_1_s": physics.gamma,
            "mean_square_position_m2": mean_square,
            "equipartition_ratio": mean_square / expected,
            "n_fits": len(fits),
        }
        if fits:
            omega0 = np.array([f.omega0 for f in fits])
            gamma = np.array([f.gamma for f in fits])
            omega_fit = float(omega0.mean())
            report.update(
                {
                    "omega_fit_rad_s": omega_fit,
                    "omega_fit_std": float(omega0.std()),
                    "gamma_fit_1_s": float(gamma.mean()),
                    "gamma_fit_std": float(gamma.std()),
                    "omega_relative_error": omega_fit / physics.omega - 1.0,
                    "gamma_relative_error": float(gamma.mean()) / physics.gamma - 1.0,
                    "mass_estimate_kg": physics.kB * physics.temperature / (omega_fit**2 * mean_square),
                    "mass_true_kg": physics.mass,
                }
            )
            self.writer.write_columns(
                "calibration_fits.csv", {"omega0": omega0, "gamma": gamma}
            )
            logger.info(
                f"PSD 보정: ω₀/2π = {omega_fit / (2 * math.pi):.6g} Hz, Γ = {gamma.mean():.4g} 1/s "
                f"(참값 {physics.gamma:.4g}), 등분배 비 {report['equipartition_ratio']:.4f}"
            )
        return report
