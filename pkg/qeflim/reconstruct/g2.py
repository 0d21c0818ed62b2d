"""
Second-order photon correlation between two detector channels.
"""

import warnings

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from ..exceptions import ChannelError, DomainError
from ..tagstream import TagKind, absolute_times_ns
from ..utils.data_structures import G2Result, LagHistogram


def g2_model(lag, contrast, bunching, tau_anti, tau_bunch):
    """1 + c * (-(1 + a) exp(-|t| / tau1) + a exp(-|t| / tau2))"""
    lag = np.abs(lag)
    return 1 + contrast * (-(1 + bunching) * np.exp(-lag / tau_anti)
                           + bunching * np.exp(-lag / tau_bunch))


def g2_correlate(stream, *, window_ns=200.0, bin_ns=1.0, channels=(0, 1)):
    """
    Histogram of arrival-time differences t1 - t0 between photons of the two
    channels within +/- window_ns, normalized by the count an uncorrelated
    pair of streams with the same rates would give.
    """
    header, table = stream
    if not (window_ns > 0 and bin_ns > 0):
        raise DomainError("window and bin width must be > 0")
    n_lag_bins = max(int(round(2 * window_ns / bin_ns)), 1)
    edges = (np.arange(n_lag_bins + 1) - n_lag_bins / 2) * bin_ns
    lags = 0.5 * (edges[1:] + edges[:-1])

    photons = table[table.kind == TagKind.PHOTON]
    zeros = np.zeros(n_lag_bins)
    if len(photons) == 0:
        return LagHistogram(lags, zeros.astype(np.int64), zeros, zeros.copy(), bin_ns)

    times = absolute_times_ns(photons, header)
    t0 = np.sort(times[photons.channel == channels[0]])
    t1 = np.sort(times[photons.channel == channels[1]])
    for ch, t in zip(channels, (t0, t1)):
        if len(t) == 0:
            raise ChannelError("no photons on channel {}".format(ch))

    # every (t0, t1) pair inside the window, enumerated per t0 photon
    lo = np.searchsorted(t1, t0 + edges[0], side="left")
    hi = np.searchsorted(t1, t0 + edges[-1], side="left")
    n_partners = hi - lo
    first = np.repeat(np.arange(len(t0)), n_partners)
    offset = np.arange(n_partners.sum()) - np.repeat(np.cumsum(n_partners) - n_partners,
                                                     n_partners)
    diffs = t1[np.repeat(lo, n_partners) + offset] - t0[first]
    counts, _ = np.histogram(diffs, bins=edges)

    duration = times.max() - times.min()
    if duration > 0:
        expected = np.full(n_lag_bins, len(t0) * len(t1) * bin_ns / duration)
        g2 = counts / expected
    else:
        expected = zeros
        g2 = zeros.copy()
    return LagHistogram(lags, counts, expected, g2, bin_ns)


def _initial_guess(hist):
    lags, g2 = hist.lags_ns, hist.g2
    center = np.abs(lags) <= 2 * hist.bin_ns
    dip = float(np.min(g2[center])) if np.any(center) else float(np.min(g2))
    contrast = float(np.clip(1 - dip, 0.05, 1.0))
    bunching = float(max(np.max(g2) - 1, 0.05))
    half_window = float(np.max(np.abs(lags)))
    return [contrast, bunching, half_window / 20, half_window / 4]


def g2_fit(hist, *, p0=None, single_emitter_threshold=0.5):
    """
    Least-squares fit of the three-level form to a normalized lag histogram.
    Single-emitter status is decided from the fitted g2(0) = 1 - contrast
    and left undecided (None) when the fit does not converge.
    """
    lags = hist.lags_ns
    g2 = hist.g2
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(hist.counts > 0,
                         np.sqrt(np.maximum(hist.counts, 1)) / hist.expected,
                         1 / hist.expected)
    if not np.all(np.isfinite(sigma)):
        sigma = None
    if p0 is None:
        p0 = _initial_guess(hist)
    half_window = float(np.max(np.abs(lags)))
    bounds = ([0.0, 0.0, 1e-3, 1e-3], [2.0, 100.0, half_window, 100 * half_window])
    p0 = np.clip(p0, bounds[0], bounds[1])

    names = ("contrast", "bunching_amplitude", "antibunching_time", "bunching_time")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(g2_model, lags, g2, p0=p0, sigma=sigma,
                                   bounds=bounds, method="trf",
                                   xtol=1e-12, ftol=1e-12, max_nfev=20000)
    except (RuntimeError, ValueError):
        nan = dict.fromkeys(names + ("g2_zero",), np.nan)
        return G2Result(lags, g2, hist.counts, nan, dict(nan), False, None)

    params = dict(zip(names, popt))
    params["g2_zero"] = 1 - params["contrast"]
    perr = np.sqrt(np.clip(np.diag(pcov), 0, None))
    stderr = dict(zip(names, perr))
    stderr["g2_zero"] = stderr["contrast"]
    single = bool(params["g2_zero"] < single_emitter_threshold)
    return G2Result(lags, g2, hist.counts, params, stderr, True, single)
