"""
Normalized emission rate of a dipole above a planar interface.

Both integrals are split at s = 1. The propagating part uses s = sin(u) and
the evanescent part s = cosh(v); either substitution cancels the 1/s_z
factor so the integrands stay bounded at the split point. The evanescent
range is cut where the envelope exp(-2 k1 z0 sqrt(s^2 - 1)) (times the
polynomial growth of the integrand) drops below `QuadratureConfig.envelope`.
"""

import cmath
import math
import warnings

import numpy as np
from scipy import integrate

from ..exceptions import (ConvergenceError, DomainError,
                          QuadratureTruncationWarning)
from .fresnel import reflection_coefficients
from .models import QuadratureConfig

PARALLEL = "parallel"
PERPENDICULAR = "perpendicular"


def _check_height(geometry, q):
    if geometry.emitter_height < q.min_height:
        raise DomainError(
            "emitter height {} nm is below the {} nm floor".format(
                geometry.emitter_height, q.min_height))


def _propagating_integrand(component, eps1, eps2, a):
    # a = 2 k1 z0
    if component == PARALLEL:
        def integrand(u):
            s = math.sin(u)
            s_z = math.cos(u)
            r_te, r_tm = reflection_coefficients(s, eps1, eps2)
            phase = cmath.exp(1j * a * s_z)
            return 0.75 * (s * (r_te - s_z * s_z * r_tm) * phase).real
    else:
        def integrand(u):
            s = math.sin(u)
            _, r_tm = reflection_coefficients(s, eps1, eps2)
            phase = cmath.exp(1j * a * math.cos(u))
            return 1.5 * (s * s * s * r_tm * phase).real
    return integrand


def _evanescent_integrand(component, eps1, eps2, a):
    # Re{-i X} = Im{X}; s_z = i sinh(v)
    if component == PARALLEL:
        def integrand(v):
            s = math.cosh(v)
            sh = math.sinh(v)
            r_te, r_tm = reflection_coefficients(s, eps1, eps2)
            return 0.75 * s * math.exp(-a * sh) * (r_te + sh * sh * r_tm).imag
    else:
        def integrand(v):
            s = math.cosh(v)
            _, r_tm = reflection_coefficients(s, eps1, eps2)
            return 1.5 * s * s * s * math.exp(-a * math.sinh(v)) * r_tm.imag
    return integrand


def _evanescent_cut(a, q):
    """
    Upper s of the evanescent range for envelope parameter a = 2 k1 z0:
    where exp(-a sqrt(s^2 - 1)), times the cubic growth of the integrand,
    falls below the envelope tolerance. Returns (s_cut, truncated).
    """
    if a <= 0:
        return q.s_max, True
    log_env = math.log(1 / q.envelope)
    decay = (log_env + 3 * math.log1p(log_env / a)) / a
    s_cut = math.hypot(1.0, decay)
    if s_cut > q.s_max:
        return q.s_max, True
    return s_cut, False


def _breakpoints(eps1, eps2):
    """
    Values of s where the integrand has kinks or sharp features: the branch
    point of k_{z,2} and, for metals, the surface plasmon pole.
    """
    points = []
    branch = cmath.sqrt(eps2 / eps1).real
    points.append(branch)
    if eps2.real < -eps1:
        pole = cmath.sqrt(eps2 / (eps1 + eps2)).real
        points.append(pole)
    return points


def _quad(f, lo, hi, points, q):
    inner = sorted(p for p in points if lo < p < hi)
    epsabs = q.rel_tolerance * 1e-2
    out = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=q.rel_tolerance,
                         limit=q.limit, points=inner or None, full_output=1)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abserr > 100 * max(epsabs, q.rel_tolerance * abs(value)):
        raise ConvergenceError("quadrature did not reach the requested "
                               "tolerance: " + str(out[3]).splitlines()[0],
                               estimate=value, error_bound=abserr)
    return value, abserr


def interface_integral(geometry, component, q=None):
    """
    The interface term of the normalized rate (everything except the unity
    free-space term), as (value, error_bound).
    """
    if q is None:
        q = QuadratureConfig()
    _check_height(geometry, q)
    if geometry.is_homogeneous:
        return 0.0, 0.0

    eps1 = geometry.eps1
    eps2 = geometry.eps2
    a = 2 * geometry.k1 * geometry.emitter_height
    points = _breakpoints(eps1, eps2)

    f_prop = _propagating_integrand(component, eps1, eps2, a)
    prop_points = [math.asin(p) for p in points if p < 1]
    prop, prop_err = _quad(f_prop, 0.0, math.pi / 2, prop_points, q)

    s_cut, truncated = _evanescent_cut(a, q)
    if truncated:
        warnings.warn("evanescent range truncated at s_max = {}".format(s_cut),
                      QuadratureTruncationWarning)
    f_evan = _evanescent_integrand(component, eps1, eps2, a)
    evan_points = [math.acosh(p) for p in points if 1 < p < s_cut]
    evan, evan_err = _quad(f_evan, 0.0, math.acosh(s_cut), evan_points, q)

    return prop + evan, prop_err + evan_err


def ldos_parallel(geometry, q=None):
    """
    P/P0 for a dipole oriented parallel to the interface.
    """
    value, _ = interface_integral(geometry, PARALLEL, q)
    return 1.0 + value


def ldos_perpendicular(geometry, q=None):
    """
    P/P0 for a dipole oriented perpendicular to the interface.
    """
    value, _ = interface_integral(geometry, PERPENDICULAR, q)
    return 1.0 + value


def orientation_weights(phi, weighting="linear"):
    """
    Weights (w_parallel, w_perpendicular) of the two components for a dipole
    at elevation `phi` above the interface plane. "linear" is the
    plain cos/sin mixing, "squared" the cos^2/sin^2 projection.
    """
    if not 0 <= phi <= math.pi / 2 + 1e-12:
        raise DomainError("orientation must lie in [0, pi/2], got {}".format(phi))
    if phi == 0:
        return 1.0, 0.0
    if abs(phi - math.pi / 2) < 1e-15:
        return 0.0, 1.0
    c, s = math.cos(phi), math.sin(phi)
    if weighting == "linear":
        return c, s
    if weighting == "squared":
        return c * c, s * s
    raise ValueError("unknown weighting {!r}".format(weighting))


def far_field_weight(phi, weighting="linear"):
    """Limit of ldos_oriented as the height goes to infinity."""
    return sum(orientation_weights(phi, weighting))


def mix_components(rho_par, rho_perp, phi, *, weighting="linear", model="nv"):
    """
    Combine parallel and perpendicular rates into the orientation-dependent
    rate. Works elementwise on arrays.

    model="single" is the one-dipole rate of `ldos_oriented`. model="nv"
    adds a second, surface-parallel dipole orthogonal to the first and
    divides by the summed far-field weights.
    """
    w_par, w_perp = orientation_weights(phi, weighting)
    oriented = w_par * np.asarray(rho_par) + w_perp * np.asarray(rho_perp)
    if model == "single":
        return oriented
    if model == "nv":
        return (oriented + np.asarray(rho_par)) / (w_par + w_perp + 1.0)
    raise ValueError("unknown emitter model {!r}".format(model))


def ldos_oriented(geometry, phi, q=None, *, weighting="linear"):
    """
    rho(z, lambda, phi) for a single dipole at elevation `phi`.
    """
    w_par, w_perp = orientation_weights(phi, weighting)
    rho = 0.0
    if w_par:
        rho += w_par * ldos_parallel(geometry, q)
    if w_perp:
        rho += w_perp * ldos_perpendicular(geometry, q)
    return rho


def ldos_nv(geometry, phi, q=None, *, weighting="linear"):
    """
    Two-dipole rate of an NV center: the dipole at elevation `phi` plus its
    orthogonal partner lying in the surface plane, both with the same free
    radiative rate. Normalized to 1 in the far field.
    """
    w_par, w_perp = orientation_weights(phi, weighting)
    rho_par = ldos_parallel(geometry, q)
    rho_perp = ldos_perpendicular(geometry, q) if w_perp else 0.0
    return float(mix_components(rho_par, rho_perp, phi,
                                weighting=weighting, model="nv"))
