"""
Mapping of wall-clock time to cantilever height.

Each cantilever marker coincides with the top (most distant point) of the
oscillation and spans `marker_divisor` periods to the next marker. Between
two markers the period is taken as constant; before the first and after the
last marker the neighbouring interval's period is extrapolated for at most
one marker spacing.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import CoverageError, DomainError


@dataclass(frozen=True)
class CantileverPhaseModel:
    period: float
    amplitude: float
    marker_divisor: int = 4096
    # probe-sample distance at the lowest point of the oscillation
    offset: float = 0.0
    phase_origin: str = "top"

    def __post_init__(self):
        if not self.period > 0:
            raise DomainError("cantilever period must be > 0")
        if not self.amplitude > 0:
            raise DomainError("oscillation amplitude must be > 0")
        if self.phase_origin != "top":
            raise DomainError("only the top-of-oscillation marker phase is supported")

    @classmethod
    def from_header(cls, header, offset=0.0):
        return cls(period=header.cantilever_period_ns,
                   amplitude=header.cantilever_amplitude,
                   marker_divisor=header.marker_divisor,
                   offset=offset)

    def height_of_phase(self, phase):
        return (0.5 * self.amplitude * (1 + np.cos(2 * np.pi * phase))
                + self.offset)


def height_at(t, markers, model):
    """
    Height in nm (above the lowest point of the oscillation, plus the
    model's offset) at time(s) `t` in ns, given the cantilever marker times
    `markers` in ns.
    """
    markers = np.asarray(markers, dtype=float)
    if markers.size == 0:
        raise CoverageError("no cantilever markers in the stream")
    t_arr = np.asarray(t, dtype=float)

    divisor = model.marker_divisor
    if markers.size == 1:
        periods = np.array([model.period])
    else:
        periods = np.diff(markers) / divisor
        if np.any(periods <= 0):
            raise CoverageError("cantilever markers are not increasing")

    lo = markers[0] - periods[0] * divisor
    hi = markers[-1] + periods[-1] * divisor
    outside = (t_arr < lo) | (t_arr > hi)
    if np.any(outside):
        raise CoverageError("{} time(s) outside the marker coverage "
                            "[{}, {}] ns".format(int(np.sum(outside)), lo, hi))

    interval = np.searchsorted(markers, t_arr, side="right") - 1
    ref_idx = np.clip(interval, 0, markers.size - 1)
    period = periods[np.clip(interval, 0, periods.size - 1)]
    phase = (t_arr - markers[ref_idx]) / period
    height = model.height_of_phase(phase)
    if height.ndim == 0:
        return float(height)
    return height


def bin_width(model, n_bins):
    return model.amplitude / n_bins


def bin_centers(model, n_bins):
    """Bin centers in nm above the lowest point of the oscillation."""
    return (np.arange(n_bins) + 0.5) * bin_width(model, n_bins)


def assign_height_bins(photon_times, markers, model, n_bins):
    """
    Equal-width height bin over [0, A] of every photon time (ns).
    """
    if n_bins < 1:
        raise DomainError("n_bins must be >= 1")
    heights = np.atleast_1d(height_at(photon_times, markers, model)) - model.offset
    idx = np.floor(heights / model.amplitude * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def dwell_fraction(model, n_bins):
    """
    Fraction of time a sinusoid spends in each equal-width height bin: the
    arcsine law, largest in the outermost bins.
    """
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    cdf = np.arccos(1 - 2 * edges) / math.pi
    return np.diff(cdf)
