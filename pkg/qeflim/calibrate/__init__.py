from .approach_fit import (fit_approach_curve, synthetic_curve,
                           average_approach_curves, START_ORIENTATIONS)
