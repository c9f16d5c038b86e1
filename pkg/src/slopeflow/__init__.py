"""Stability slopes, singular-limit certificates and 1D geometric flows.

Library layout:

- surface_lattice:    exact intersection arithmetic, Zariski decomposition,
                      volumes of big classes on Kahler surfaces
- surface_slopes:     minimal J-slope and dHYM slope certificates on surfaces
- bundle_geometry:    exact intersection theory on symmetric projective
                      bundles and their zero-section blow-ups
- calabi_profiles:    closed-form steady momentum profiles, slope and angle
                      functionals, admissibility predicates
- flow_engine:        finite-difference integration of the reduced flows with
                      runtime monitors and convergence detection
- energy_functionals: moment-map energy, its infimum, Futaki invariants of
                      piecewise-linear configurations, minimizing sequences,
                      and the dHYM volume functional
- cli:                command-line front end
"""

from .surface_lattice import (
    DivisorClass,
    SurfaceModel,
    ZariskiDecomposition,
    intersect,
    is_kahler,
    is_nef,
    load_surface_model,
    volume,
    zariski,
)
from .surface_slopes import (
    SEMISTABLE,
    STABLE,
    UNSTABLE,
    SlopeCertificate,
    blowup_plane_model,
    dhym_slope_certificate,
    j_slope_certificate,
    one_point_blowup_certificate,
)
from .bundle_geometry import (
    BundleParams,
    BundleSlopeCertificate,
    ChowElement,
    combinatorial_identity_check,
    intersection_number,
    min_slope_certificate,
    steady_slope,
    weight_integral,
)

__version__ = "0.1.0"
