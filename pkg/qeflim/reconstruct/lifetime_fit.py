"""
Poisson maximum-likelihood fit of A * exp(-t / tau) + B to a micro-time
histogram. Channels before the cutoff (instrument response, reflections)
are excluded.
"""

import warnings

import numpy as np
from scipy.optimize import minimize

from ..exceptions import DomainError
from ..utils.data_structures import LifetimeFit

# bounds on log(tau), relative to channel width and fit window
_TAU_MIN_CHANNELS = 0.1
_TAU_MAX_WINDOWS = 100.0
# amplitude must exceed this many standard errors
_MIN_SIGNIFICANCE = 3.0


def fit_window(n_channels, channel_width_ns, cutoff_ns):
    """(channel indices, times since the first fitted channel) of the fit."""
    start = int(np.ceil(cutoff_ns / channel_width_ns - 1e-9))
    idx = np.arange(max(start, 0), n_channels)
    return idx, (idx - idx[0] + 0.5) * channel_width_ns if len(idx) else idx


def _initial_guess(t, y):
    tail = y[-max(len(y) // 10, 1):]
    offset = max(float(np.mean(tail)), 0.0)
    signal = np.clip(y - offset, 0, None)
    if signal.sum() <= 0:
        return max(float(y[0]), 1.0), float(t[-1]), offset
    # mean arrival time of the excess counts
    tau = float(np.sum(t * signal) / np.sum(signal))
    tau = min(max(tau, t[1] - t[0] if len(t) > 1 else 1.0), t[-1])
    amplitude = max(float(np.mean(signal[:3])), 1.0)
    return amplitude, tau, offset


def _fisher(t, amplitude, tau, level):
    """Fisher information of (A, tau, C) for mu = A (e^-t/tau - e^-T/tau) + C."""
    decay = np.exp(-t / tau)
    end, last = t[-1], np.exp(-t[-1] / tau)
    mu = amplitude * (decay - last) + level
    jac = np.stack([decay - last,
                    amplitude * (t * decay - end * last) / tau**2,
                    np.ones_like(t)])
    return (jac / mu) @ jac.T


def _projected_gradient(x, grad, bounds):
    """Gradient with the components pushing against an active bound zeroed."""
    grad = np.array(grad, dtype=float)
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and x[i] <= lo + 1e-9 and grad[i] > 0:
            grad[i] = 0.0
        if hi is not None and x[i] >= hi - 1e-9 and grad[i] < 0:
            grad[i] = 0.0
    return grad


def fit_lifetime(counts, channel_width_ns, *, cutoff_ns=5.0, min_counts=100):
    """
    Fit one histogram. Returns a LifetimeFit; tau is NaN unless the fit
    converged with a significant amplitude and tau away from its bounds.

    The offset is searched through the level C = A e^(-T/tau) + B of the
    model at the last fitted channel T, which keeps the expected counts
    positive while letting B itself go below zero.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1:
        raise DomainError("expected a 1-d histogram")
    if not channel_width_ns > 0:
        raise DomainError("channel width must be > 0")

    idx, t = fit_window(len(counts), channel_width_ns, cutoff_ns)
    y = counts[idx]
    n_photons = int(y.sum())
    failed = LifetimeFit(np.nan, np.nan, np.nan, np.nan, n_photons, False)
    if n_photons < min_counts or len(y) < 4:
        return failed

    end = t[-1]
    window = end + 0.5 * channel_width_ns
    log_tau_lo = np.log(_TAU_MIN_CHANNELS * channel_width_ns)
    log_tau_hi = np.log(_TAU_MAX_WINDOWS * window)

    a0, tau0, b0 = _initial_guess(t, y)
    tau0 = float(np.clip(tau0, np.exp(log_tau_lo), np.exp(log_tau_hi)))
    c0 = max(b0 + a0 * np.exp(-end / tau0), 1e-6 * a0)
    bounds = [(np.log(a0) - 40, np.log(a0) + 10),
              (log_tau_lo, log_tau_hi),
              (np.log(a0) - 40, np.log(max(y.max(), a0)) + 10)]
    x0 = np.array([np.log(a0), np.log(tau0),
                   np.clip(np.log(c0), bounds[2][0], bounds[2][1])])

    def nll(x):
        log_a, log_tau, log_c = x
        rate = np.exp(-log_tau)
        scaled = np.exp(log_a - t * rate)
        last = np.exp(log_a - end * rate)
        level = np.exp(log_c)
        mu = np.maximum(scaled - last + level, 1e-300)
        value = np.sum(mu - y * np.log(mu))
        resid = 1 - y / mu
        grad = np.array([np.sum(resid * (scaled - last)),
                         np.sum(resid * (scaled * t - last * end)) * rate,
                         np.sum(resid) * level])
        return value, grad

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(nll, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"ftol": 1e-15, "gtol": 1e-9, "maxiter": 5000})

    log_a, log_tau, log_c = res.x
    amplitude, tau, level = np.exp(log_a), np.exp(log_tau), np.exp(log_c)
    # the line search may stop short of `success` right at a very flat optimum
    projected = _projected_gradient(res.x, res.jac, bounds)
    settled = res.success or np.all(np.abs(projected) < 1e-6 * max(n_photons, 1))
    if not (settled and np.all(np.isfinite(res.x))):
        return failed

    fisher = _fisher(t, amplitude, tau, level)
    if log_c <= bounds[2][0] + 1e-6:
        # level pinned at its floor: the tail carries no information on it
        fisher = fisher[:2, :2]
    try:
        cov = np.linalg.inv(fisher)
    except np.linalg.LinAlgError:
        return failed
    var = np.diag(cov)
    if np.any(~np.isfinite(var)) or var[0] <= 0 or var[1] <= 0:
        return failed
    stderr_tau = float(np.sqrt(var[1]))

    at_bound = log_tau > log_tau_hi - 1e-3 or log_tau < log_tau_lo + 1e-3
    significant = amplitude > _MIN_SIGNIFICANCE * np.sqrt(var[0])
    if at_bound or not significant:
        return failed
    offset = level - amplitude * np.exp(-end / tau)
    return LifetimeFit(float(tau), float(amplitude), float(offset), stderr_tau,
                       n_photons, True)
