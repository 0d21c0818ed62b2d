import numpy as np

from .integrals import ldos_parallel, ldos_perpendicular, mix_components
from .models import LayeredGeometry, QuadratureConfig, VACUUM
from .rates import decay_rate


def spectral_average(rho_fn, spectrum):
    """
    Gaussian-weighted average of `rho_fn(wavelength)` over the nodes of
    `spectrum`.
    """
    wavelengths, weights = spectrum.nodes()
    values = [rho_fn(wavelength) for wavelength in wavelengths]
    return sum(w * v for w, v in zip(weights, values))


def _substrate_at(substrate, wavelength):
    # Either a fixed Medium or a callable wavelength -> Medium
    if callable(substrate):
        return substrate(wavelength)
    return substrate


class _cache():
    # (heights, media, wavelength/spectrum, q) -> (rho_par, rho_perp)
    entries = {}
    max_entries = 32


def rho_components(heights, substrate, *,
                   medium_emitter=VACUUM,
                   wavelength=700.0,
                   spectrum=None,
                   q=None,
                   verbose=False):
    """
    Parallel and perpendicular normalized rates on a grid of heights.

    If `spectrum` is given the rates are averaged over its nodes and
    `wavelength` is ignored. `substrate` is a Medium, or a callable mapping
    wavelength to a Medium for dispersive materials. Results for fixed media
    are cached, so repeated fits over the same height grid only pay once.
    """
    if q is None:
        q = QuadratureConfig()
    heights = np.atleast_1d(np.asarray(heights, dtype=float))

    key = None
    if not callable(substrate):
        key = (tuple(heights), substrate, medium_emitter,
               None if spectrum is not None else float(wavelength),
               spectrum, q)
        if key in _cache.entries:
            rho_par, rho_perp = _cache.entries[key]
            return rho_par.copy(), rho_perp.copy()

    if spectrum is None:
        wavelengths, weights = np.array([float(wavelength)]), np.array([1.0])
    else:
        wavelengths, weights = spectrum.nodes()

    rho_par = np.zeros(heights.shape)
    rho_perp = np.zeros(heights.shape)
    for wavelength_i, weight in zip(wavelengths, weights):
        medium = _substrate_at(substrate, wavelength_i)
        for idx, height in enumerate(heights):
            geometry = LayeredGeometry(height, medium_emitter, medium,
                                       wavelength_i)
            rho_par[idx] += weight * ldos_parallel(geometry, q)
            rho_perp[idx] += weight * ldos_perpendicular(geometry, q)
        if verbose:
            print("rho components done for wavelength", wavelength_i)

    if key is not None:
        if len(_cache.entries) >= _cache.max_entries:
            _cache.entries.pop(next(iter(_cache.entries)))
        _cache.entries[key] = (rho_par.copy(), rho_perp.copy())

    return rho_par, rho_perp


def approach_curve(heights, substrate, emitter, *,
                   medium_emitter=VACUUM,
                   wavelength=700.0,
                   spectral=True,
                   q=None,
                   model="nv",
                   weighting="linear",
                   verbose=False):
    """
    Forward model k(z) = k_nr + k_r0 * rho(z, phi) of an emitter approaching
    the interface. With `spectral` the emitter's spectrum is averaged over.
    """
    spectrum = emitter.spectrum if spectral else None
    rho_par, rho_perp = rho_components(
        heights, substrate, medium_emitter=medium_emitter,
        wavelength=wavelength, spectrum=spectrum, q=q, verbose=verbose)
    rho = mix_components(rho_par, rho_perp, emitter.orientation,
                         weighting=weighting, model=model)
    return decay_rate(emitter, rho)
