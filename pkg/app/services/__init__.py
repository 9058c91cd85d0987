from app.services.analysis_service import AnalysisService
from app.services.base_service import BaseService
from app.services.calibration_service import CalibrationService
from app.services.classical_service import ClassicalService
from app.services.experiment_service import ExperimentService
from app.services.quantum_service import QuantumService

__all__ = [
    'AnalysisService',
    'BaseService',
    'CalibrationService',
    'ClassicalService',
    'ExperimentService',
    'QuantumService',
]
