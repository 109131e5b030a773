"""Low-rank periodizing operators for 2D particle interactions.

The far-field images of a unit cell are summed by plane-wave factorizations
``L D R`` for the Poisson, modified Helmholtz, Stokes and modified Stokes
kernels, in singly or doubly periodic cells.
"""

from .apply import FieldResult, Path, apply_direct, apply_periodizer, near_field, total_field
from .cell import (
    ParticleSystem,
    Periodicity,
    UnitCell,
    cell_from_aspect,
    make_unit_cell,
    near_translations,
    random_points,
)
from .cli import build_periodizer
from .errors import *  # noqa: F401,F403
from .factorization import Direction, Periodizer, PlaneWaveFactorization, truncation_order
from .kernels import PDE, Kernel, kernel_for
from .multipole import build_multipole_periodizer
from .oracle import brute_force_far, periodicity_residual
from .quadrature import sommerfeld_rule
from .scalar import assemble
from .stokes import assemble_velocity, build_pressure_periodizer, build_stresslet_periodizer

__version__ = "0.1.0"
