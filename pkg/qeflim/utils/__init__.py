from .data_loaders import (load_heightmap, write_heightmap, read_approach_curve,
                           write_approach_curve, load_materials, volume_frame,
                           write_volume, write_gradient, write_g2, write_pgm,
                           write_report)
from .misc import *
from .data_structures import (PixelHistograms, LifetimeFit, LifetimeVolume,
                              GradientMap, LagHistogram, G2Result,
                              ApproachCurve, CalibrationResult, MASK_NAMES,
                              VALID, INSUFFICIENT_COUNTS, BELOW_SURFACE,
                              UNREACHED, NOT_CONVERGED)
from .summarize import summarize, summarize_calibration, summarize_g2
from .config import RunConfig
