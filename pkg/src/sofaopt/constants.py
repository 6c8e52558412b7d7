"""Reference constants used across modules and tests."""

import numpy as np

# Area of Gerver's 18-section sofa, the conjectured global maximum.
GERVER_AREA = 2.219532

# Area of Hammersley's sofa, pi/2 + 2/pi; the calibration fixture.
HAMMERSLEY_AREA = float(np.pi / 2.0 + 2.0 / np.pi)

# Minimum total rotation of any maximal movement, arcsin(84/85) (~81.2 deg).
MIN_ROTATION = float(np.arcsin(84.0 / 85.0))


def hammersley_family_area(r):
    """Closed-form unswept area of the semicircle-corner family."""
    return float(np.pi / 2.0 + 2.0 * r - np.pi * r * r / 2.0)
