from app.analysis.backbone import duffing_backbone
from app.analysis.fitting import ashman_D, fit_double_gaussian, relaxation_time
from app.analysis.phase_space import phase_space_density, position_marginal
from app.analysis.spectrum import psd_lorentzian_calibration

__all__ = [
    'ashman_D',
    'duffing_backbone',
    'fit_double_gaussian',
    'phase_space_density',
    'position_marginal',
    'psd_lorentzian_calibration',
    'relaxation_time',
]
