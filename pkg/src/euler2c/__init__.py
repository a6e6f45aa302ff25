"""Two-centre problem: dynamics, Euler integral, charts, secular theory and collision sets."""

__version__ = "0.1.0"

from .core import CartesianState, DomainError, MassParams, StencilError, poisson_bracket  # noqa: E402
from .dynamics import SymmetricParams, Trajectory, integrate  # noqa: E402
from .integrals import commuting_set, conservation_report, euler_G, euler_G0, euler_G1, euler_G_sym  # noqa: E402

__all__ = [
    "CartesianState",
    "DomainError",
    "MassParams",
    "StencilError",
    "SymmetricParams",
    "Trajectory",
    "commuting_set",
    "conservation_report",
    "euler_G",
    "euler_G0",
    "euler_G1",
    "euler_G_sym",
    "integrate",
    "poisson_bracket",
]
