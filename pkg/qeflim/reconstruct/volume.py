"""
Lifetime volumes from binned histograms, and their re-registration onto
absolute sample coordinates.
"""

import multiprocessing

import numpy as np
from tqdm import tqdm

from ..exceptions import DomainError, ShapeError
from ..utils.data_structures import (BELOW_SURFACE, INSUFFICIENT_COUNTS,
                                     LifetimeVolume, NOT_CONVERGED, UNREACHED,
                                     VALID)
from .lifetime_fit import fit_lifetime


def _fit_one(args):
    counts, width, cutoff_ns, min_counts = args
    return fit_lifetime(counts, width, cutoff_ns=cutoff_ns, min_counts=min_counts)


def fit_grid(histograms, channel_width_ns, *,
             cutoff_ns=5.0,
             min_counts=100,
             threads=1,
             verbose=False):
    """
    Fit every histogram of an (..., n_channels) array. Returns a dict of
    per-voxel arrays and the fit mask (valid, insufficient_counts or
    not_converged).
    """
    histograms = np.asarray(histograms)
    shape = histograms.shape[:-1]
    flat = histograms.reshape(-1, histograms.shape[-1])
    args = [(h, channel_width_ns, cutoff_ns, min_counts) for h in flat]

    if threads == 1:
        fits = [_fit_one(a) for a in tqdm(args, disable=not verbose)]
    else:
        with multiprocessing.Pool(threads) as pool:
            fits = pool.map(_fit_one, args, chunksize=64)

    result = {
        "tau": np.array([f.tau for f in fits]).reshape(shape),
        "stderr": np.array([f.stderr_tau for f in fits]).reshape(shape),
        "amplitude": np.array([f.amplitude for f in fits]).reshape(shape),
        "offset": np.array([f.offset for f in fits]).reshape(shape),
        "n_photons": np.array([f.n_photons for f in fits],
                              dtype=np.int64).reshape(shape),
        "converged": np.array([f.converged for f in fits], dtype=bool).reshape(shape),
    }
    mask = np.full(shape, VALID, dtype=np.int8)
    mask[~result["converged"]] = NOT_CONVERGED
    mask[result["n_photons"] < min_counts] = INSUFFICIENT_COUNTS
    return result, mask


def quarter_images(histograms, *, cutoff_ns=5.0, min_counts=100, verbose=False):
    """
    Lifetime images from the photons of the closest quarter (bin centers
    below A/4) and the most distant quarter (at or above 3A/4) of the
    oscillation. Each is a LifetimeVolume with a single layer.
    """
    centers = histograms.bin_heights
    amplitude = histograms.amplitude
    quarters = {
        "closest": centers < amplitude / 4,
        "distant": centers >= 3 * amplitude / 4,
    }
    images = {}
    for name, sel in quarters.items():
        if not np.any(sel):
            # fewer than four bins: use the outermost one
            sel = np.zeros(len(centers), dtype=bool)
            sel[0 if name == "closest" else -1] = True
        pooled = histograms.counts[:, :, sel].sum(axis=2, keepdims=True)
        fits, mask = fit_grid(pooled, histograms.channel_width_ns,
                              cutoff_ns=cutoff_ns, min_counts=min_counts,
                              verbose=verbose)
        images[name] = LifetimeVolume.from_fit_arrays(
            fits, mask, [float(np.mean(centers[sel]))],
            pitch=histograms.pitch, histograms=pooled,
            channel_width_ns=histograms.channel_width_ns)
    return images


def build_volume(histograms, *,
                 cutoff_ns=5.0,
                 min_counts=100,
                 quarters=True,
                 threads=1,
                 verbose=False):
    """
    Fit every (pixel, height bin) histogram into a LifetimeVolume with
    heights relative to the lowest point of the oscillation.
    """
    fits, mask = fit_grid(histograms.counts, histograms.channel_width_ns,
                          cutoff_ns=cutoff_ns, min_counts=min_counts,
                          threads=threads, verbose=verbose)
    volume = LifetimeVolume.from_fit_arrays(
        fits, mask, histograms.bin_heights, pitch=histograms.pitch,
        histograms=histograms.counts,
        channel_width_ns=histograms.channel_width_ns)
    if quarters:
        volume.quarter_images = quarter_images(
            histograms, cutoff_ns=cutoff_ns, min_counts=min_counts)
    if verbose:
        print("volume", volume.shape, "with", int(volume.valid.sum()), "valid voxels")
    return volume


def _absolute_grid(heightmap, tip_offset, bin_width, n_bins):
    z_floor = np.floor(heightmap.min() / bin_width) * bin_width
    z_reach = heightmap.max() + tip_offset + n_bins * bin_width
    nz = int(np.ceil((z_reach - z_floor) / bin_width - 1e-9))
    return z_floor + (np.arange(nz) + 0.5) * bin_width


def topography_correct(volume, heightmap, *,
                       tip_offset=0.0,
                       cutoff_ns=5.0,
                       min_counts=100,
                       verbose=False):
    """
    Re-register a relative volume onto absolute z using the sample heights
    under each pixel. Relative bin j of a pixel with surface height z_top
    lands in the absolute bin nearest to z_top + tip_offset + h_j. Sources
    sharing a target bin are merged: histograms summed and refit if the
    volume kept them, otherwise the source closest in z wins.
    """
    if volume.absolute:
        raise DomainError("volume is already topography corrected")
    heightmap = np.asarray(heightmap, dtype=float)
    ny, nx, n_bins = volume.shape
    if heightmap.shape != (ny, nx):
        raise ShapeError("heightmap shape {} does not match the {}x{} scan".format(
            heightmap.shape, ny, nx))
    if n_bins > 1:
        width = volume.bin_width
    else:
        width = 2 * float(volume.z_centers[0])

    z_abs = _absolute_grid(heightmap, tip_offset, width, n_bins)
    nz = len(z_abs)
    z_floor = z_abs[0] - 0.5 * width

    # source voxel (iy, ix, j) -> target voxel (iy, ix, k)
    z_src = heightmap[:, :, None] + tip_offset + volume.z_centers[None, None, :]
    k = np.clip(np.floor((z_src - z_floor) / width).astype(np.int64), 0, nz - 1)
    iy, ix, _ = np.indices(volume.shape)
    target = (iy * nx + ix) * nz + k
    n_target = ny * nx * nz
    has_source = np.bincount(target.ravel(), minlength=n_target) > 0

    if volume.histograms is not None:
        n_channels = volume.histograms.shape[-1]
        merged = np.zeros((n_target, n_channels), dtype=volume.histograms.dtype)
        np.add.at(merged, target.ravel(), volume.histograms.reshape(-1, n_channels))
        merged = merged.reshape(ny, nx, nz, n_channels)
        fits, mask = fit_grid(merged, volume.channel_width_ns,
                              cutoff_ns=cutoff_ns, min_counts=min_counts,
                              verbose=verbose)
    else:
        merged = None
        # nearest source per target: sort by (target, distance), take first
        dist = np.abs(z_src - (z_floor + (k + 0.5) * width)).ravel()
        order = np.lexsort((dist, target.ravel()))
        targets, first = np.unique(target.ravel()[order], return_index=True)
        chosen = order[first]
        fits = {}
        for name, fill in (("tau", np.nan), ("stderr", np.nan),
                           ("amplitude", np.nan), ("offset", np.nan),
                           ("n_photons", 0), ("converged", False)):
            src = getattr(volume, name).ravel()
            out = np.full(n_target, fill, dtype=src.dtype)
            out[targets] = src[chosen]
            fits[name] = out.reshape(ny, nx, nz)
        mask_out = np.full(n_target, UNREACHED, dtype=np.int8)
        mask_out[targets] = volume.mask.ravel()[chosen]
        mask = mask_out.reshape(ny, nx, nz)

    mask = np.where(has_source.reshape(ny, nx, nz), mask, UNREACHED)
    below = z_abs[None, None, :] < heightmap[:, :, None]
    mask = np.where(below, BELOW_SURFACE, mask).astype(np.int8)

    corrected = LifetimeVolume.from_fit_arrays(
        fits, mask, z_abs, pitch=volume.pitch, absolute=True,
        heightmap=heightmap, histograms=merged,
        channel_width_ns=volume.channel_width_ns)
    corrected.quarter_images = volume.quarter_images
    if verbose:
        print("re-registered onto", nz, "absolute layers of", width, "nm")
    return corrected


def height_slice(volume, z_low, z_high, *, cutoff_ns=5.0, min_counts=100):
    """
    Single-layer image from the layers with centers inside [z_low, z_high].
    Histograms are pooled and refit when available, otherwise the layer
    nearest the middle of the range is used.
    """
    if not z_high >= z_low:
        raise DomainError("empty height range")
    sel = (volume.z_centers >= z_low) & (volume.z_centers <= z_high)
    if not np.any(sel):
        raise DomainError("no layer inside [{}, {}] nm".format(z_low, z_high))
    layers = np.flatnonzero(sel)
    if volume.histograms is None:
        mid = 0.5 * (z_low + z_high)
        nearest = layers[np.argmin(np.abs(volume.z_centers[layers] - mid))]
        return volume.subvolume(layers=slice(nearest, nearest + 1))

    pooled = volume.histograms[:, :, layers].sum(axis=2, keepdims=True)
    fits, mask = fit_grid(pooled, volume.channel_width_ns,
                          cutoff_ns=cutoff_ns, min_counts=min_counts)
    # no photons and every source layer masked by geometry: keep that reason
    geometric = np.all(np.isin(volume.mask[:, :, layers],
                               (BELOW_SURFACE, UNREACHED)), axis=2)
    reason = volume.mask[:, :, layers[0]]
    mask[:, :, 0] = np.where(geometric, reason, mask[:, :, 0])
    return LifetimeVolume.from_fit_arrays(
        fits, mask, [float(np.mean(volume.z_centers[layers]))],
        pitch=volume.pitch, absolute=volume.absolute,
        heightmap=volume.heightmap, histograms=pooled,
        channel_width_ns=volume.channel_width_ns)


def xz_section(volume, row):
    """The (x, z) plane of one scan row, as a volume with ny = 1."""
    if not 0 <= row < volume.shape[0]:
        raise DomainError("row {} outside the scan".format(row))
    return volume.subvolume(rows=slice(row, row + 1))


def rate_enhancement(tau_reference, tau_probe):
    """Decay-rate enhancement k_probe / k_reference = tau_ref / tau_probe."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(tau_reference, dtype=float) / np.asarray(tau_probe, dtype=float)


def stripe_contrast(image):
    """
    Largest excess of the column-mean lifetime of a single-layer image over
    its median, relative to the median. A stripe along y shows up as one
    bright column.
    """
    profile = np.nanmean(image.tau[:, :, 0], axis=0)
    median = np.nanmedian(profile)
    return max(0.0, float(np.nanmax(profile) - median)) / median
