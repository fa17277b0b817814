"""flowlab: numerical laboratory for degenerate parabolic flows.

Explicit monotone time stepping for a catalog of quasilinear and anisotropic
graph flows, closed-form comparison barriers, and a harness that verifies
gradient/displacement estimates against numerically evolved solutions.
"""

__version__ = "0.1.0"
