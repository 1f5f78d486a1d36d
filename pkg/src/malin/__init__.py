"""malin: a numerical laboratory for linearized Monge-Ampere equations.

Implements the divergence-form equation -div(Phi Du + u B) + b . Du =
f - div F on convex sections, the John-normalized section geometry it
lives on, and a harness that measures Harnack quotients, oscillation
decay, Moser chains, Sobolev ratios, and L-infinity scaling.
"""

__version__ = "0.1.0"

from .geometry import AffineMap, Polytope, SectionSpec  # noqa: F401
from .potentials import CofactorField, PinchBounds, make_potential  # noqa: F401
