"""Footstep localization with a building floor used as a physical reservoir.

The pipeline turns synchronized floor-accelerometer recordings into footstep
position estimates: event detection, short waveform windows as reservoir
states, RMS normalization, PCA compression and a ridge-trained linear readout,
with an optional constant-velocity Kalman smoother on top.
"""

from .errors import ConfigError, DataError, FloorPrcError, NumericalError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "FloorPrcError", "NumericalError", "__version__"]
