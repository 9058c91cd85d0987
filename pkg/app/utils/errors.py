from typing import Optional


class LevSqueezeError(Exception):
    """모든 도메인 예외의 기본 클래스"""

    exit_code = 2

    def __init__(self, message: str, module: Optional[str] = None, operation: Optional[str] = None):
        super().__init__(message)
        self.module = module
        self.operation = operation

    def to_dict(self) -> dict:
        """기계가 읽을 수 있는 오류 보고서를 반환합니다."""
        return {
            "status": "error",
            "error_type": type(self).__name__,
            "error_msg": str(self),
            "module": self.module,
            "operation": self.operation,
        }


class ConfigError(LevSqueezeError, ValueError):
    """설정 파일 파싱/검증 오류"""

    exit_code = 1

    def __init__(self, message: str, key_path: Optional[str] = None):
        super().__init__(message, module="cli-io", operation="load_config")
        self.key_path = key_path


class SimulationError(LevSqueezeError, RuntimeError):
    """시뮬레이션 실행 오류 (탈출 비율 초과 등)"""


class NumericalError(SimulationError):
    """유한하지 않은 상태 또는 불변량 위반"""

    def __init__(
        self,
        message: str,
        seed: Optional[int] = None,
        step: Optional[int] = None,
        module: Optional[str] = None,
        operation: Optional[str] = None,
    ):
        super().__init__(message, module=module, operation=operation)
        self.seed = seed
        self.step = step

    def to_dict(self) -> dict:
        report = super().to_dict()
        report.update({"seed": self.seed, "step": self.step})
        return report


class AnalysisError(LevSqueezeError, ValueError):
    """피팅 실패, 피크 미검출, 식별 불가능한 파라미터"""

    def __init__(self, message: str, operation: Optional[str] = None):
        super().__init__(message, module="phase-space-analysis", operation=operation)


class GridError(LevSqueezeError, ValueError):
    """양자 격자 해상도/꼬리 조건 위반"""

    def __init__(self, message: str, operation: Optional[str] = None):
        super().__init__(message, module="quantum-sim", operation=operation)
