"""Layout-aware topology distortion and sensitivity analysis for superconducting devices."""

from .geomsweep import CALIBRATION_VERSION

__version__ = "0.1.0"

__all__ = ["CALIBRATION_VERSION", "__version__"]
