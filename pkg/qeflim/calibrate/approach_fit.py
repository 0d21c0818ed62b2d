"""
Quantum efficiency and dipole orientation from a measured approach curve.

The curve k(z) = k_nr + k_r0 * rho(z, phi) is fit for (k_nr, k_r0, phi)
with bounded least squares, started from several orientations. For a given
phi the model is linear in the two rates, which gives each start its
initial rates.
"""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import least_squares

from ..exceptions import FitError, IdentifiabilityError, ShapeError
from ..ldos import (QuadratureConfig, VACUUM, mix_components,
                    qe_from_rates, rho_components)
from ..utils.data_structures import ApproachCurve, CalibrationResult

N_PARAMS = 3
START_ORIENTATIONS = np.linspace(0, math.pi / 2, 5)
# starts whose costs agree this closely count as ties
_TIE_RTOL = 1e-9


def _linear_rates(rho, rates, weights):
    design = np.stack([np.ones_like(rho), rho], axis=1) * weights[:, None]
    (k_nr, k_r0), *_ = np.linalg.lstsq(design, rates * weights, rcond=None)
    return max(k_nr, 0.0), max(k_r0, 1e-6 * np.max(rates))


def _check_identifiable(curve, wavelength):
    if len(curve) < 4:
        raise IdentifiabilityError(
            "need at least 4 samples for 3 parameters, got {}".format(len(curve)))
    if curve.span < wavelength / 2:
        raise IdentifiabilityError(
            "approach curve spans {:.4g} nm, need at least half a wavelength "
            "({:.4g} nm) to separate the rates".format(curve.span, wavelength / 2))


def fit_approach_curve(curve, substrate, *,
                       medium_emitter=VACUUM,
                       wavelength=700.0,
                       spectrum=None,
                       q=None,
                       model="nv",
                       weighting="linear",
                       init=None,
                       threads=1,
                       verbose=False):
    """
    Fit an ApproachCurve measured above `substrate` (a Medium, or a
    callable wavelength -> Medium). Rates are averaged over `spectrum` if
    given, otherwise evaluated at `wavelength`. `init` is an optional
    (k_nr, k_r0, phi) tried before the default starts.
    """
    if q is None:
        q = QuadratureConfig()
    center = spectrum.center if spectrum is not None else wavelength
    _check_identifiable(curve, center)

    rho_par, rho_perp = rho_components(
        curve.heights, substrate, medium_emitter=medium_emitter,
        wavelength=wavelength, spectrum=spectrum, q=q, verbose=verbose)
    weights = curve.weights
    unit_weights = curve.stderr is None or np.all(weights == 1)

    def residuals(x):
        k_nr, k_r0, phi = x
        rho = mix_components(rho_par, rho_perp, phi, weighting=weighting,
                             model=model)
        return (k_nr + k_r0 * rho - curve.rates) * weights

    starts = []
    if init is not None:
        starts.append(np.asarray(init, dtype=float))
    for phi0 in START_ORIENTATIONS:
        rho0 = mix_components(rho_par, rho_perp, phi0, weighting=weighting,
                              model=model)
        starts.append(np.array([*_linear_rates(rho0, curve.rates, weights), phi0]))

    lower = [0.0, 1e-12, 0.0]
    upper = [np.inf, np.inf, math.pi / 2]

    def run(x0):
        x0 = np.clip(x0, lower, [1e300, 1e300, math.pi / 2])
        return least_squares(residuals, x0, bounds=(lower, upper),
                             method="trf", jac="3-point", diff_step=1e-4,
                             x_scale="jac", xtol=1e-12, ftol=1e-12, gtol=1e-12,
                             max_nfev=2000)

    if threads == 1:
        results = [run(x0) for x0 in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))

    results = [r for r in results if r.status > 0 and np.all(np.isfinite(r.x))]
    if not results:
        raise FitError("approach-curve fit did not converge from any start")
    best_cost = min(r.cost for r in results)
    ties = [r for r in results if r.cost <= best_cost * (1 + _TIE_RTOL) + 1e-300]
    best = min(ties, key=lambda r: r.x[2])
    k_nr, k_r0, phi = (float(v) for v in best.x)

    chi_square = float(2 * best.cost)
    jac = best.jac
    cov = np.linalg.pinv(jac.T @ jac)
    dof = len(curve) - N_PARAMS
    if unit_weights and dof > 0:
        cov = cov * chi_square / dof

    result = CalibrationResult(k_nr=k_nr, k_r0=k_r0, phi=phi,
                               qe=qe_from_rates(k_r0, k_nr),
                               residual=chi_square, covariance=cov,
                               model=model, n_samples=len(curve))
    if verbose:
        print("calibration: k_nr = {:.4g}, k_r0 = {:.4g} /us, phi = {:.2f} deg, "
              "QE = {:.4f}".format(k_nr, k_r0, math.degrees(phi), result.qe))
    return result


def synthetic_curve(heights, substrate, emitter, *,
                    noise=0.0,
                    seed=0,
                    medium_emitter=VACUUM,
                    wavelength=700.0,
                    spectral=True,
                    q=None,
                    model="nv",
                    weighting="linear"):
    """
    Approach curve of a known emitter with multiplicative Gaussian noise of
    relative size `noise`. Uncertainties are attached when noise > 0.
    """
    spectrum = emitter.spectrum if spectral else None
    rho_par, rho_perp = rho_components(
        heights, substrate, medium_emitter=medium_emitter,
        wavelength=wavelength, spectrum=spectrum, q=q)
    rho = mix_components(rho_par, rho_perp, emitter.orientation,
                         weighting=weighting, model=model)
    rates = emitter.nonradiative_rate + emitter.radiative_rate_free * rho
    stderr = None
    if noise > 0:
        rng = np.random.default_rng(seed)
        stderr = noise * rates
        rates = rates + stderr * rng.standard_normal(len(rates))
    return ApproachCurve(heights, rates, stderr)


def average_approach_curves(curves):
    """
    Mean of repeated approach curves over the same heights. Uncertainties
    combine the attached ones, or come from the scatter between curves when
    any curve has none.
    """
    curves = list(curves)
    if not curves:
        raise ShapeError("nothing to average")
    heights = curves[0].heights
    if any(c.heights.shape != heights.shape or np.any(c.heights != heights)
           for c in curves):
        raise ShapeError("approach curves to average need identical heights")
    rates = np.stack([c.rates for c in curves])
    n = len(curves)
    if all(c.stderr is not None for c in curves):
        stderr = np.sqrt(np.sum([c.stderr**2 for c in curves], axis=0)) / n
    elif n > 1:
        stderr = rates.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        stderr = None
    return ApproachCurve(heights, rates.mean(axis=0), stderr)
