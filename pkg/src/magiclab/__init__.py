"""Magic-state resource theory tools for odd-prime qudits."""
from . import channels, conic, measures, phase_space, simulator, synthesis
from ._validation import DimensionError, ValidationError
from .channels import Channel, parse_channel, state_library
from .measures import MeasureReport, is_cpwp, mana_channel, mana_state, max_thauma_channel, max_thauma_state
from .phase_space import PhasePoint, WignerTable, wigner_of_channel, wigner_of_choi, wigner_of_state
from .simulator import Circuit, estimate, exact_born

__all__ = [
    "channels",
    "conic",
    "measures",
    "phase_space",
    "simulator",
    "synthesis",
    "DimensionError",
    "ValidationError",
    "Channel",
    "parse_channel",
    "state_library",
    "MeasureReport",
    "is_cpwp",
    "mana_channel",
    "mana_state",
    "max_thauma_channel",
    "max_thauma_state",
    "PhasePoint",
    "WignerTable",
    "wigner_of_channel",
    "wigner_of_choi",
    "wigner_of_state",
    "Circuit",
    "estimate",
    "exact_born",
]

__version__ = "0.1.0"
