"""Stability-region mapping for multi-unit DFIG wind farms."""

__version__ = "0.1.0"

from .params import (  # noqa: F401
    ConverterParams,
    ControllerGains,
    GridSource,
    LineParams,
    MachineParams,
    Setpoints,
    SystemSpec,
    UnitSpec,
    bind,
    default_spec,
    load_spec,
    read_param,
    save_spec,
)
from .state import StateLayout  # noqa: F401
from .model import aggregate, rhs, rotate_dq_to_xy  # noqa: F401
from .equilibrium import EquilibriumResult, solve_equilibrium  # noqa: F401
from .modal import ModalReport, is_stable, jacobian, spectrum, spectrum_of  # noqa: F401
