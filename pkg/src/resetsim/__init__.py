"""
Modeling, simulation and verification of reset control systems.

Submodules
----------
numerics   subspaces, eigenstructure and zero location for Bohl functions
model      reset systems, plants, compensators and closed-loop assembly
wellposed  well-posedness of reset instants
simulate   event-driven solutions with reset and crossing instants
analysis   Hausdorff distances, continuity probes, reach enclosures, noise
config     JSON system descriptions
cli        the ``resetsim`` command
"""
__version__ = "0.1.0"

from .model import (  # noqa: E402
    ClosedLoop,
    Compensator,
    Exosystem,
    Plant,
    ResetSystem,
    SeriesForm,
    assemble_closed_loop,
    build_reset_system,
)
from .simulate import SimOptions, Status, Trajectory, simulate  # noqa: E402
from .wellposed import Verdict, cancellation_analysis, check_structural, check_well_posed  # noqa: E402

__all__ = [
    "__version__",
    "ClosedLoop",
    "Compensator",
    "Exosystem",
    "Plant",
    "ResetSystem",
    "SeriesForm",
    "assemble_closed_loop",
    "build_reset_system",
    "SimOptions",
    "Status",
    "Trajectory",
    "simulate",
    "Verdict",
    "cancellation_analysis",
    "check_structural",
    "check_well_posed",
]
