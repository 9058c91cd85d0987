from app.utils.config_loader import collect_applied_defaults, format_validation_error, load_config
from app.utils.errors import AnalysisError, ConfigError, GridError, LevSqueezeError, NumericalError
from app.utils.io import ArtifactWriter, read_snapshots_csv, read_trace_csv

__all__ = [
    'collect_applied_defaults',
    'format_validation_error',
    'load_config',
    'AnalysisError',
    'ConfigError',
    'GridError',
    'LevSqueezeError',
    'NumericalError',
    'ArtifactWriter',
    'read_snapshots_csv',
    'read_trace_csv',
]
