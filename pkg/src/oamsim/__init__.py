"""Simulator for orbital-angular-momentum multiplexing circuits on single photons."""

from .errors import *  # noqa: F401,F403
from .fock import (
    AMP_PRUNE,
    NORM_TOL,
    BasisState,
    Mode,
    PureState,
    QubitSpec,
    fidelity,
    make_qubit,
    make_single_photon,
    marginal_path_probability,
    tensor,
)
from .elements import GateTally, PiAngle, pi_over

__version__ = "0.1.0"
