"""Linked-twist chaos in periodically switched planar Hamiltonian systems.

Modules
-------
models
    The three model variants, their parameters, Hamiltonians and fields.
integrate
    Batched adaptive Dormand-Prince integration with dense output.
orbitlib
    Section points, periods, rotation numbers and orbit samples.
annuli
    Annuli, linkage certificates and oriented intersection rectangles.
ltm
    Switching schedules, thresholds, stretching certificates, itineraries.
scenario, cli
    Scenario files and the ``linkedtwist`` command.
"""

from . import annuli, catalog, integrate, ltm, models, orbitlib
from .annuli import Annulus, LinkCertificate, OrientedRectangle, intersection_rectangles, link_check
from .integrate import DEFAULT_CONFIG, IntegratorConfig, first_crossing, flow
from .ltm import (
    Perturbation,
    StretchCertificate,
    SwitchSchedule,
    ThresholdReport,
    itinerary_demo,
    perturb_and_recheck,
    poincare,
    thresholds,
    verify_all,
    verify_stretch,
)
from .models import (
    SystemSpec,
    center,
    derive_neg,
    derive_pos,
    hamiltonian,
    linearized_frequency,
    rotation_direction,
    vector_field,
)
from .orbitlib import orbit_samples, period, rotation_number, section_points

__version__ = "0.1.0"
