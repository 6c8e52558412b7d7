"""Numerical toolkit for the moving sofa problem.

Two complementary tracks:

* direct maximization of the unswept corridor area over neural-network
  parameterized movements (:class:`sofaopt.training.SofaAreaMaximizer`);
* optimization of the Kallus-Romik upper bound over rotation centers
  (:class:`sofaopt.kallus_romik.KallusRomikBound`).

Both sit on a shared differentiable geometry core (wall envelopes plus the
waterfall area quadrature) and a small reverse-mode autodiff engine.
"""

from .autodiff import Tape, Tensor
from .constants import GERVER_AREA, HAMMERSLEY_AREA, MIN_ROTATION
from .geometry import (
    FringeCurves,
    MovementSample,
    TimeGrid,
    assemble_fringes,
    compute_envelopes,
    hammersley_movement,
    sample_movement,
)
from .waterfall import AreaResult, WaterfallConfig, compute_area

__version__ = "0.1.0"

__all__ = [
    "AreaResult",
    "FringeCurves",
    "GERVER_AREA",
    "HAMMERSLEY_AREA",
    "MIN_ROTATION",
    "MovementSample",
    "Tape",
    "Tensor",
    "TimeGrid",
    "WaterfallConfig",
    "assemble_fringes",
    "compute_area",
    "compute_envelopes",
    "hammersley_movement",
    "sample_movement",
    "__version__",
]
