"""Generalized electric-magnetic photodetection models.

Submodules:

- ``farfield``: two-dipole far-field patterns and the detector weight.
- ``onephoton``: two-mode single-photon detection, visibility, POVM, Bloch.
- ``resonant``: lossy resonant detector, bright/dark channels, absorption.
- ``sampler``: Monte Carlo photon counting and visibility estimation.
- ``cli``: the ``emdetect`` command.
"""

__version__ = "0.1.0"

from .core import ComplexResponse, PreconditionError
from .table import ScanTable

__all__ = ["ComplexResponse", "PreconditionError", "ScanTable", "__version__"]
