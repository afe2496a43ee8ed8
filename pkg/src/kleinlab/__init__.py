"""kleinlab: orbits, Poincare series, conformal measures and ends of Kleinian groups.

Isometries of hyperbolic 2- and 3-space act on the Poincare ball; they are
stored as 2x2 complex matrices acting on the upper half-space.
"""

__version__ = "0.1.0"

from .errors import (
    BoundaryProximityError,
    BudgetExceededError,
    EmptyMeasureError,
    EndsOverlapError,
    HeuristicCosetsRejected,
    HeuristicModeRequired,
    HypothesisError,
    InsufficientDepthError,
    KleinlabError,
    NotFixedError,
    PoleError,
)
from .geometry import (
    Isometry,
    apply,
    apply_boundary,
    compose,
    conformal_factor_boundary,
    conformal_factor_interior,
    dist,
    hyperbolic_distance,
    invert,
)
from .words import Word, enumerate_words, free_count
from .groups import GroupSpec, OrbitTable, CosetTable, cosets, limit_set_sample, orbit, orbit_count, word_matrices
from .poincare import convergence_verdict, critical_exponent, poincare_partial
from .measures import (
    AtomicMeasure,
    Cap,
    CapFamily,
    bl_discrepancy,
    cap_mass,
    cocycle_residual,
    conformality_residual,
    generator_residuals,
    image_measure,
    orbit_measure,
    point_mass,
    read_measure_csv,
    restrict,
    total_mass,
    weak_limit_run,
)
from .ends import EndCollection, EndSpec, Regions, check_fixed
from .shadows import Shadow, escape_mass, shadow, shadow_angle, shadow_masses, verify_shadow_lemma
from .endmeasures import choice_invariance, decompose, extend_measure, parabolic_orbit_measure
from .classify import BoundaryClassifier, classify_boundary_point, endpoints_disjointness_check
from . import fixtures
