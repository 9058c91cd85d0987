from typing import Any, Dict, Type

from loguru import logger

from app.models.config import RunConfig
from app.services.analysis_service import AnalysisService
from app.services.base_service import BaseService
from app.services.calibration_service import CalibrationService
from app.services.classical_service import ClassicalService
from app.services.quantum_service import QuantumService


class ExperimentService:
    """실행 종류(kind)에 맞는 파이프라인을 골라 실행합니다."""

    def __init__(self, threads: int = 1):
        """
        Args:
            threads: 파이프라인에 넘길 최대 작업자 수
        """
        self.threads = threads
        self._pipelines: Dict[str, Type[BaseService]] = {
            "classical": ClassicalService,
            "quantum": QuantumService,
            "analyze": AnalysisService,
            "calibrate": CalibrationService,
        }

    def _get_pipeline(self, config: RunConfig) -> BaseService:
        pipeline_class = self._pipelines.get(config.kind)
        if pipeline_class is None:
            raise ValueError(f"지원하지 않는 실행 종류: {config.kind}")
        logger.debug(f"kind '{config.kind}' 에 대한 파이프라인 '{pipeline_class.__name__}' 선택")
        return pipeline_class(config, threads=self.threads)

    def run(self, config: RunConfig) -> Dict[str, Any]:
        """
        설정에 맞는 파이프라인을 실행합니다.

        Args:
            config: 검증된 실행 설정

        Returns:
            Dict[str, Any]: metadata.json 내용
        """
        try:
            return self._get_pipeline(config).run()
        except Exception as e:
            logger.error(f"실행 중 오류 발생: {str(e)} (kind: {config.kind})")
            raise
