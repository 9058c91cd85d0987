import math
from typing import Any, Dict

import numpy as np
from loguru import logger

from app.analysis import relaxation_time
from app.models.classical import ClassicalPhysics, EnsembleResult
from app.models.config import AnalysisSettings
from app.models.physics import PulseProtocol
from app.physics import duffing_coefficient, trap_frequency
from app.services.analysis_service import analyze_snapshot
from app.services.base_service import BaseService
from app.simulator import run_ensemble, variance_timeseries
from app.utils.errors import AnalysisError


class ClassicalService(BaseService):
    """고전 Langevin 앙상블 → 스냅샷 → 쌍봉성 분석 파이프라인"""

    kind = "classical"

    def execute(self) -> Dict[str, Any]:
        config = self.config
        sim = config.simulation
        physics = ClassicalPhysics.from_specs(config.particle, config.trap, config.gas, sim.force_model)
        protocol = config.protocol.with_timing(physics.omega)
        self._log_physics(physics, protocol)

        result = run_ensemble(protocol, sim, physics, threads=self.threads)
        self.writer.write_snapshots("snapshots.csv", result)

        settings = config.analysis or AnalysisSettings()
        reports = []
        for k, (t, points) in enumerate(zip(result.snapshot_times, result.snapshots)):
            report = analyze_snapshot(points, settings, self.writer, tag=f"_k{k:03d}")
            report.update({"snapshot_index": k, "t": t, "pulses_completed": self._pulses_before(protocol, t)})
            reports.append(report)
            if "A_D" in report:
                logger.info(f"스냅샷 {k} (t={t:.6g} s): A_D = {report['A_D']:.3f}")
        self.writer.write_json("bimodality.json", {"snapshots": reports})

        results: Dict[str, Any] = {
            "physics": physics.model_dump(),
            "protocol": protocol.model_dump(),
            "ensemble": result.metadata,
            "snapshots": reports,
        }
        if result.trace_positions is not None:
            results["relaxation"] = self._relaxation(result, physics, protocol)
        return results

    def _log_physics(self, physics: ClassicalPhysics, protocol: PulseProtocol) -> None:
        config = self.config
        formula = trap_frequency(config.trap, config.particle, config.trap.power_high)
        logger.info(
            f"ω/2π = {physics.omega / (2 * math.pi):.6g} Hz (공식값 {formula / (2 * math.pi):.6g} Hz), "
            f"Γ_m = {physics.gamma:.4g} 1/s, ξ = {duffing_coefficient(config.trap):.4g} 1/m², "
            f"σ_th = {physics.thermal_position_std:.4g} m"
        )
        logger.info(f"τ_high = {protocol.tau_high:.6g} s, τ_low = {protocol.tau_low:.6g} s, 펄스 {protocol.n_pulses}개")
        if abs(protocol.s_low - config.trap.s_low) > 1e-3:
            logger.warning(
                f"protocol.s_low={protocol.s_low} 가 출력비 P_low/P_high={config.trap.s_low:.4f} 와 다릅니다"
            )

    @staticmethod
    def _pulses_before(protocol: PulseProtocol, t: float) -> int:
        return min(protocol.n_pulses, int(math.floor(t / protocol.cycle + 1e-9)))

    def _relaxation(self, result: EnsembleResult, physics: ClassicalPhysics, protocol: PulseProtocol) -> Dict[str, Any]:
        """펄스열 이후 분산 시계열과 이완 시간"""
        settings = self.config.analysis or AnalysisSettings()
        window = settings.variance_window or physics.period
        centers, stds = variance_timeseries(result, window)
        self.writer.write_columns("variance.csv", {"t": centers, "std_x_m": stds})

        expected = 1.0 / physics.gamma if physics.gamma > 0 else math.inf
        report: Dict[str, Any] = {"window_s": window, "expected_tau_s": expected}
        after = centers >= protocol.train_duration
        if np.count_nonzero(after) < 4:
            report["error"] = "펄스열 이후 구간이 짧습니다"
            return report
        try:
            fit = relaxation_time(centers[after], stds[after] ** 2)
            report.update(fit.model_dump())
            report["tau_over_expected"] = fit.tau / expected
        except AnalysisError as e:
            logger.warning(f"이완 시간 분석 실패: {e}")
            report["error"] = str(e)
        return report
