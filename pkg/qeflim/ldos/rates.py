import numpy as np

from ..exceptions import DomainError


def decay_rate(emitter, rho):
    """
    k = k_nr + k_r0 * rho in inverse microseconds. `rho` may be an array.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 0):
        raise DomainError("normalized LDOS must be >= 0")
    rate = emitter.nonradiative_rate + emitter.radiative_rate_free * rho_arr
    if rate.ndim == 0:
        return float(rate)
    return rate


def lifetime_ns(rate_per_us):
    """tau = 1/k, converted from inverse microseconds to nanoseconds."""
    return 1e3 / np.asarray(rate_per_us, dtype=float)


def rate_per_us(lifetime):
    """Inverse of `lifetime_ns`."""
    return 1e3 / np.asarray(lifetime, dtype=float)


def qe_from_rates(k_r0, k_nr):
    if not k_r0 > 0:
        raise DomainError("free radiative rate must be > 0, got {}".format(k_r0))
    if k_nr < 0:
        raise DomainError("nonradiative rate must be >= 0, got {}".format(k_nr))
    return k_r0 / (k_r0 + k_nr)


def quantum_efficiency(emitter):
    """QE = k_r0 / (k_r0 + k_nr)."""
    return qe_from_rates(emitter.radiative_rate_free, emitter.nonradiative_rate)
