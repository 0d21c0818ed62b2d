from .binning import bin_photons, accumulate_histograms, pooled_decay
from .lifetime_fit import fit_lifetime, fit_window
from .volume import (build_volume, fit_grid, quarter_images,
                     topography_correct, height_slice, xz_section,
                     rate_enhancement, stripe_contrast)
from .gradient import gradient_map, inward_fraction
from .g2 import g2_correlate, g2_fit, g2_model
