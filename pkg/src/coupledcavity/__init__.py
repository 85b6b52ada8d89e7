"""Transverse eigenmodes of two coupled unstable strip cavities."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    ABCDMatrix,
    CavityGeometry,
    HorwitzParams,
    StabilityReport,
    abcd_convex_reflection,
    abcd_half_cavity,
    classify_stability,
    horwitz_params,
    magnification_from_trace,
    subcavity_roundtrip,
)
from .operators import (  # noqa: E402
    Grid,
    assemble_coupled,
    assemble_parity,
    assemble_scaled,
    build_operator,
    make_grid,
)
from .spectrum import SpectrumResult, solve_spectrum, spectrum_values  # noqa: E402
