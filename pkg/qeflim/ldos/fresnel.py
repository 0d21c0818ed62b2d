"""
Reflection coefficients of the planar interface, in terms of the transverse
wavenumber s normalized by k1.

The coefficients are named by their physical role: `r_te` is the
permeability-weighted (s-polarized) coefficient and `r_tm` the
permittivity-weighted (p-polarized) one. Some texts label them
the other way round (its r-perp is the eps-weighted one); the integrands in
`integrals.py` couple the perpendicular dipole to `r_tm` only.
"""

import cmath

import numpy as np

from ..exceptions import DomainError


def normalized_kz(eps_i, eps1, s):
    """
    k_{z,i} / k1 = sqrt(eps_i/eps1 - s^2), on the branch with Im >= 0.
    """
    root = cmath.sqrt(complex(eps_i) / eps1 - s * s)
    if root.imag < 0 or (root.imag == 0 and root.real < 0):
        root = -root
    return root


def reflection_coefficients(s, eps1, eps2):
    """
    Scalar kernel used inside the quadrature loops.
    """
    q1 = normalized_kz(eps1, eps1, s)
    q2 = normalized_kz(eps2, eps1, s)
    r_te = (q1 - q2) / (q1 + q2)
    r_tm = (eps2 * q1 - eps1 * q2) / (eps2 * q1 + eps1 * q2)
    return r_te, r_tm


def fresnel(s, geometry):
    """
    Reflection coefficients (r_te, r_tm) at normalized transverse
    wavenumber `s` for the interface described by `geometry`. `s` may be a
    scalar or an array; arrays return arrays.
    """
    s_arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s_arr)):
        raise DomainError("s must be finite")
    if np.any(s_arr < 0):
        raise DomainError("s must be >= 0")

    eps1 = geometry.eps1
    eps2 = geometry.eps2
    if s_arr.ndim == 0:
        return reflection_coefficients(float(s_arr), eps1, eps2)

    q1 = np.sqrt(1 - s_arr**2 + 0j)
    q2 = np.sqrt(eps2 / eps1 - s_arr**2 + 0j)
    # enforce the decaying branch
    q1 = np.where(q1.imag < 0, -q1, q1)
    q2 = np.where(q2.imag < 0, -q2, q2)
    r_te = (q1 - q2) / (q1 + q2)
    r_tm = (eps2 * q1 - eps1 * q2) / (eps2 * q1 + eps1 * q2)
    return r_te, r_tm
