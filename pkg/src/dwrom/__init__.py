"""Reduced-order models for 1D dispersive water waves.

Full-order solvers for the BBM-KdV equation (finite differences) and the
enhanced Boussinesq system (P1 finite elements), POD reduced models with the
dispersive operators precomputed (pdROM), empirical interpolation of the
nonlinear fluxes (EIMROM), and an offline/online experiment harness.
"""

from . import bbm, eb, eim, numcore, rom
from .errors import (ConfigurationError, DryStateError, DwromError, EimInstability, FormatError,
                     IntegrityError, SimulationAbort, SingularMatrixError)

__version__ = "0.1.0"
