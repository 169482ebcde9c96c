"""Random-data cubic NLS on the torus: sampling, gauged Picard solver, norms, counting and probes."""
__version__ = "0.1.0"

from .params import ModelParams, RegimeWarning, critical_regularity, srd  # noqa: E402
from .lattice import LatticeSpec  # noqa: E402
from .field import FourierField, SpaceTimeField  # noqa: E402
from .random_data import sample  # noqa: E402
from .evolution import free_evolution  # noqa: E402
from .solver import NumericalFailure, picard_solve, direct_step_solve, solve  # noqa: E402
from .counting import BudgetExceeded, CountQuery, run_query  # noqa: E402
from .norms import NormSpec  # noqa: E402
from .probes import ProbeReport, run_probe  # noqa: E402

__all__ = [
    "__version__", "ModelParams", "RegimeWarning", "critical_regularity", "srd", "LatticeSpec",
    "FourierField", "SpaceTimeField", "sample", "free_evolution", "NumericalFailure", "picard_solve",
    "direct_step_solve", "solve", "BudgetExceeded", "CountQuery", "run_query", "NormSpec", "ProbeReport",
    "run_probe",
]
