import warnings

import numpy as np

from ..exceptions import (CoverageError, ExcludedPhotonsWarning, FormatError,
                          ShapeError)
from ..tagstream import TagKind, absolute_times_ns
from ..tagstream.height import CantileverPhaseModel, assign_height_bins
from ..utils.data_structures import PixelHistograms


def bin_photons(stream, n_bins, *, offset=0.0, verbose=False):
    """
    Accumulate the photons of a decoded stream into micro-time histograms
    per (pixel, height bin).

    A photon belongs to the pixel of the last pixel marker before it in
    record order. Photons ahead of the first pixel marker are excluded and
    counted; every other photon lands in exactly one histogram.
    """
    header, table = stream
    if n_bins < 1:
        raise ShapeError("n_bins must be >= 1")
    nx, ny = header.scan_dims
    n_channels = header.n_micro_channels

    cant = table.kind == TagKind.CANTILEVER_MARKER
    if not np.any(cant):
        raise CoverageError("stream has no cantilever markers")
    markers = absolute_times_ns(table[cant], header)

    is_photon = table.kind == TagKind.PHOTON
    photon_pos = np.flatnonzero(is_photon)
    marker_pos = np.flatnonzero(table.kind == TagKind.PIXEL_MARKER)
    n_photons = len(photon_pos)

    owner = np.searchsorted(marker_pos, photon_pos, side="right") - 1
    included = owner >= 0
    n_excluded = int(np.sum(~included))
    if n_excluded:
        warnings.warn("{} photon(s) precede the first pixel marker and were "
                      "excluded".format(n_excluded), ExcludedPhotonsWarning)

    photon_pos = photon_pos[included]
    pixel = table.pixel_index[marker_pos[owner[included]]]
    if np.any(pixel >= nx * ny):
        raise FormatError("pixel marker index beyond the {}x{} scan".format(nx, ny))

    photons = table[photon_pos]
    if np.any(photons.micro_time >= n_channels):
        raise FormatError("photon micro time beyond the {} channels of a sync "
                          "period".format(n_channels))
    model = CantileverPhaseModel.from_header(header, offset=offset)
    height_bin = assign_height_bins(absolute_times_ns(photons, header), markers,
                                    model, n_bins)

    flat = (pixel * n_bins + height_bin) * n_channels + photons.micro_time
    counts = np.bincount(flat, minlength=nx * ny * n_bins * n_channels)
    counts = counts.reshape(ny, nx, n_bins, n_channels)

    if verbose:
        print("binned", len(photons), "of", n_photons, "photons into",
              ny, "x", nx, "pixels and", n_bins, "height bins")
    return PixelHistograms(counts, header.micro_resolution * 1e-3,
                           header.cantilever_amplitude,
                           pitch=header.pixel_pitch,
                           n_photons=n_photons, n_excluded=n_excluded)


def accumulate_histograms(histogram_list):
    """Sum the histograms of repeated scans of the same region."""
    histogram_list = list(histogram_list)
    if not histogram_list:
        raise ShapeError("nothing to accumulate")
    total = histogram_list[0]
    for hist in histogram_list[1:]:
        total = total + hist
    return total


def pooled_decay(histograms, *, bins=None):
    """
    Micro-time histogram summed over all pixels, restricted to the given
    height bins if any.
    """
    counts = histograms.counts
    if bins is not None:
        counts = counts[:, :, bins]
    return counts.sum(axis=tuple(range(counts.ndim - 1)))
