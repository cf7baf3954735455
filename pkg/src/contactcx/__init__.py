"""contactcx: chart-based numerics for complexified contact geometry.

Builds tube complexifications of contact manifolds carrying strictly
plurisubharmonic potentials whose d^c pulls back to the contact form, computes
contact/Kahler/CR moment maps and reductions for group actions, and verifies
the defining identities as quantitative residual checks on a scenario catalog.
"""

__version__ = "0.1.0"

from .kernels import backend_name

__all__ = ["__version__", "backend_name"]
