from typing import Any, Dict, Optional

import numpy as np
from loguru import logger

from app.analysis import (
    ashman_D,
    duffing_backbone,
    fit_double_gaussian,
    phase_space_density,
    position_marginal,
    psd_lorentzian_calibration,
)
from app.models.config import AnalysisSettings
from app.services.base_service import BaseService
from app.utils.errors import AnalysisError, ConfigError
from app.utils.io import ArtifactWriter, is_snapshot_csv, read_snapshots_csv, read_trace_csv, sample_rate_of


def analyze_snapshot(
    points: np.ndarray,
    settings: AnalysisSettings,
    writer: Optional[ArtifactWriter] = None,
    tag: str = "",
) -> Dict[str, Any]:
    """
    점구름 하나에 대한 밀도·주변분포·이중 가우시안·A_D 분석.

    분석 실패는 예외 대신 보고서의 error 항목으로 남깁니다.
    """
    report: Dict[str, Any] = {"n_points": int(points.shape[0])}
    try:
        density = phase_space_density(points, bins=settings.bins, bandwidth=settings.bandwidth)
        marginal = position_marginal(density)
        report["bandwidth_m"] = list(density.bandwidth)
        report["position_std_m"] = float(np.std(points[:, 0]))
        if writer is not None:
            writer.write_density(f"density{tag}.csv", density)
            writer.write_marginal(f"marginal{tag}.csv", marginal)
        if settings.bimodality:
            fit = fit_double_gaussian(marginal)
            report["double_gaussian"] = fit.model_dump()
            report["A_D"] = ashman_D(fit)
    except AnalysisError as e:
        logger.warning(f"스냅샷 분석 실패{tag}: {e}")
        report["error"] = str(e)
    return report


class AnalysisService(BaseService):
    """측정 또는 시뮬레이션 데이터 파일 분석 파이프라인"""

    kind = "analyze"

    def execute(self) -> Dict[str, Any]:
        settings = self.config.analysis
        path = settings.input
        if not path.exists():
            raise ConfigError(f"analysis.input 파일이 없습니다: {path}", key_path="analysis.input")

        if is_snapshot_csv(path):
            return self._analyze_snapshots(settings)
        return self._analyze_trace(settings)

    def _analyze_snapshots(self, settings: AnalysisSettings) -> Dict[str, Any]:
        snapshots = read_snapshots_csv(settings.input)
        indices = sorted(snapshots)
        if settings.snapshot_index is not None:
            if settings.snapshot_index not in snapshots:
                raise ConfigError(
                    f"스냅샷 {settings.snapshot_index} 이 입력에 없습니다", key_path="analysis.snapshot_index"
                )
            indices = [settings.snapshot_index]

        reports = []
        for k in indices:
            t, points = snapshots[k]
            report = analyze_snapshot(points, settings, self.writer, tag=f"_k{k:03d}")
            report.update({"snapshot_index": k, "t": t})
            reports.append(report)
            if "A_D" in report:
                logger.info(f"스냅샷 {k} (t={t:.6g} s): A_D = {report['A_D']:.3f}")
        self.writer.write_json("bimodality.json", {"snapshots": reports})
        return {"input": str(settings.input), "snapshots": reports}

    def _analyze_trace(self, settings: AnalysisSettings) -> Dict[str, Any]:
        if not (settings.psd or settings.backbone):
            raise ConfigError(
                "시계열 입력에는 analysis.psd 또는 analysis.backbone 이 필요합니다", key_path="analysis.psd"
            )
        t, x = read_trace_csv(settings.input)
        results: Dict[str, Any] = {"input": str(settings.input), "n_samples": int(t.size)}
        if settings.psd:
            fit = psd_lorentzian_calibration(x, sample_rate_of(t), nperseg=settings.nperseg)
            self.writer.write_json("spectrum_fit.json", fit)
            results["spectrum_fit"] = fit.model_dump()
            results["frequency_hz"] = fit.frequency_hz
        if settings.backbone:
            fit = duffing_backbone((t, x), n_bins=settings.backbone_bins)
            self.writer.write_json("backbone_fit.json", fit)
            results["backbone_fit"] = fit.model_dump()
        return results
