"""Phase transitions of fluids as nonlinear waves.

Equations of state ``T - alpha(V) P - f(V) = 0``, the equal-areas
construction, the universal Pearcey profile near the critical point, the
viscous conservation law and phase boundaries as shocks.
"""

__version__ = "0.1.0"
