"""rclab: reservoir-computing symbol detection for OFDM/MIMO-OFDM.

The recurrent weights of the detector are never trained; they are either
random (the classical echo-state choice) or configured directly from channel
statistics via PCA over zero-forcing equalizer responses.  The package also
ships the closed-form approximation-error analysis that predicts how good a
configured reservoir subspace can be, and a CLI harness for bit-error-rate
experiments against an LMMSE baseline.
"""

__version__ = "0.1.0"

from . import bench_cli, channel, filters, ofdm, reservoir, signal_core, theory, weight_config

__all__ = [
    "__version__",
    "bench_cli",
    "channel",
    "filters",
    "ofdm",
    "reservoir",
    "signal_core",
    "theory",
    "weight_config",
]
