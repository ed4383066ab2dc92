"""Modal participation factors for linear and polynomial vector fields."""

from .eigensystem import EigenSystem, eigendecompose, from_modal, modal_coordinates
from .errors import ModalError
from .normalform import (
    NormalFormTransform,
    compute_normal_form,
    invert_map,
    map_to_original,
    mode_in_state_nonlinear,
    to_modal,
)
from .participation import (
    Kind,
    Method,
    ParticipationMatrix,
    classic_pf,
    mode_in_state_mc,
    mode_in_state_symmetric,
    state_in_mode_closed,
    state_in_mode_mc,
)
from .polynomial import PolynomialMap, PolynomialVectorField
from .resonance import Classification, Theorem, detect_resonances, regime, resonant_monomials
from .sampling import InitialConditionModel, SampleStream
from .dynamics import empirical_mode_in_state, integrate, verify_conjugacy
from .sysfile import SystemSpec, parse_system, serialize_system

__version__ = "0.1.0"

__all__ = [
    "EigenSystem", "eigendecompose", "modal_coordinates", "from_modal", "ModalError",
    "NormalFormTransform", "compute_normal_form", "invert_map", "map_to_original",
    "mode_in_state_nonlinear", "to_modal", "Kind", "Method", "ParticipationMatrix", "classic_pf",
    "mode_in_state_mc", "mode_in_state_symmetric", "state_in_mode_closed", "state_in_mode_mc",
    "PolynomialMap", "PolynomialVectorField", "Classification", "Theorem", "detect_resonances",
    "regime", "resonant_monomials", "InitialConditionModel", "SampleStream",
    "empirical_mode_in_state", "integrate", "verify_conjugacy", "SystemSpec", "parse_system",
    "serialize_system",
]
