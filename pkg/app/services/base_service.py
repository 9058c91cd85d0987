import platform
import time
from abc import ABC, abstractmethod
from importlib import metadata
from typing import Any, Dict

from loguru import logger

from app.models.config import RunConfig
from app.utils.config_loader import collect_applied_defaults
from app.utils.io import ArtifactWriter

PACKAGES = ("levitated-squeezing-sim", "numpy", "scipy", "numba", "pydantic", "loguru")


def package_versions() -> Dict[str, str]:
    """실행 환경의 패키지 버전"""
    versions = {"python": platform.python_version()}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class BaseService(ABC):
    """실행 종류별 파이프라인 기본 클래스"""

    kind: str = ""

    def __init__(self, config: RunConfig, threads: int = 1):
        """
        Args:
            config: 검증된 실행 설정
            threads: 최대 작업자 수
        """
        self.config = config
        self.threads = max(1, int(threads))
        self.writer = ArtifactWriter(config.output_dir)

    @abstractmethod
    def execute(self) -> Dict[str, Any]:
        """
        파이프라인을 실행하고 결과 요약을 반환하는 추상 메서드

        Returns:
            Dict[str, Any]: metadata.json 의 results 항목
        """
        pass

    def run(self) -> Dict[str, Any]:
        """파이프라인을 실행하고 metadata.json 을 기록합니다."""
        started = time.perf_counter()
        logger.info(f"{self.kind} 파이프라인 시작 (출력: {self.config.output_dir})")
        try:
            results = self.execute()
        except Exception as e:
            logger.error(f"{self.kind} 파이프라인 오류: {type(e).__name__}: {e}")
            raise
        elapsed = time.perf_counter() - started

        meta = {
            "status": "ok",
            "kind": self.kind,
            "config": self.config.model_dump(mode="json"),
            "applied_defaults": collect_applied_defaults(self.config),
            "master_seed": self.config.master_seed,
            "threads": self.threads,
            "versions": package_versions(),
            "wall_time_s": elapsed,
            "results": results,
            "artifacts": sorted(set(self.writer.written)),
        }
        self.writer.write_json("metadata.json", meta)
        logger.info(f"{self.kind} 파이프라인 완료: {elapsed:.2f} s, 파일 {len(meta['artifacts'])}개")
        return meta
