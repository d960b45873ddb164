"""Position error bounds, measurement simulation and ML position estimation."""

from .estimation import EstimateResult, EstimationError, SearchConfig, ml_estimate
from .fisher import (FisherInfo, PebResult, SingularInformationError, delay_variance, fim, fim_delay,
                     fim_phase, gdop, link_snr, peb, phase_variance, unit_vectors)
from .measurements import Measurements, simulate_measurements

__all__ = [
    "EstimateResult", "EstimationError", "SearchConfig", "ml_estimate",
    "FisherInfo", "PebResult", "SingularInformationError", "delay_variance", "fim", "fim_delay",
    "fim_phase", "gdop", "link_snr", "peb", "phase_variance", "unit_vectors",
    "Measurements", "simulate_measurements",
]
