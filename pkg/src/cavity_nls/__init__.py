"""Mean-field simulation of nonlinear pump-probe spectroscopy of molecular polaritons."""
from .models import (MolecularModel, CavityConfig, PulseSpec, build_two_level, build_three_level,
                     pulse_envelope, gaussian_ft)

__version__ = "0.1.0"

__all__ = ["MolecularModel", "CavityConfig", "PulseSpec", "build_two_level", "build_three_level",
           "pulse_envelope", "gaussian_ft", "__version__"]
