"""
Two-detector (Hanbury Brown-Twiss) photon streams from a three-level
emitter: ground, excited and a metastable shelving state.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..exceptions import DomainError, ModelError
from ..tagstream import StreamHeader, TagKind, TagStream, TagTable


@dataclass(frozen=True)
class ThreeLevelModel:
    """
    g2(t) = 1 - (1 + a) exp(-|t| / tau1) + a exp(-|t| / tau2), times in ns.
    """
    bunching_amplitude: float = 0.0
    antibunching_time: float = 10.0
    bunching_time: float = 100.0

    def __post_init__(self):
        if self.bunching_amplitude < 0:
            raise ModelError("bunching amplitude must be >= 0")
        if not (self.antibunching_time > 0 and self.bunching_time > 0):
            raise ModelError("correlation times must be > 0")
        if self.bunching_amplitude > 0 and not self.bunching_time > self.antibunching_time:
            raise ModelError("bunching time must exceed the antibunching time")

    def g2(self, lag):
        lag = np.abs(np.asarray(lag, dtype=float))
        a = self.bunching_amplitude
        return (1 - (1 + a) * np.exp(-lag / self.antibunching_time)
                + a * np.exp(-lag / self.bunching_time))

    @property
    def g2_zero(self):
        return float(self.g2(0.0))


class ThreeLevelRates(NamedTuple):
    # ground -> excited
    pump: float
    # excited -> ground, radiative
    emission: float
    # excited -> shelf
    shelving: float
    # shelf -> ground
    deshelving: float

    @property
    def excited_population(self):
        # stationary population of the excited state
        r, g, k, b = self
        if k == 0:
            return r / (r + g)
        return r * b / (b * (r + g + k) + r * k)

    @property
    def photon_rate(self):
        """Emitted photons per ns."""
        return self.emission * self.excited_population


def three_level_rates(model):
    """
    Transition rates (per ns) whose emission statistics reproduce
    `model.g2`. Pump and emission rates are taken equal; that fixes the
    otherwise free brightness scale.
    """
    l1 = 1 / model.antibunching_time
    a = model.bunching_amplitude
    if a == 0:
        return ThreeLevelRates(l1 / 2, l1 / 2, 0.0, 1.0)
    l2 = 1 / model.bunching_time
    total = l1 + l2
    slope = l1 + a * (l1 - l2)
    deshelving = l1 * l2 / slope
    cycle = deshelving * (slope - total + deshelving)
    fast = total - deshelving
    pump = fast / 2
    shelving = cycle / pump
    emission = fast - pump - shelving
    if not emission > 0:
        raise ModelError("no three-level emitter produces this g2 "
                         "(bunching too strong for the time scales)")
    return ThreeLevelRates(pump, emission, shelving, deshelving)


def background_for_g2_zero(g2_zero):
    """
    Fraction of uncorrelated background among all detected counts that
    lifts an ideal antibunching dip to `g2_zero`.
    """
    if not 0 <= g2_zero < 1:
        raise DomainError("g2(0) must lie in [0, 1), got {}".format(g2_zero))
    signal_share = math.sqrt(1 - g2_zero)
    return 1 - signal_share


def _detection_times(rng, rates, duration, keep_prob, chunk_size):
    """
    Detected photon times of the emitter, sampled interval by interval.

    Emissions form a renewal process and so do their Bernoulli-thinned
    detections: between two detections lie `emitted` emission cycles
    (geometric), with `shelved` shelving excursions among them (negative
    binomial). Each cycle waits for a pump and an excited-state decay, each
    excursion for a de-shelving.
    """
    r, g, k, b = rates
    leave = g + k
    p_emit = g / leave
    times = []
    t_last = 0.0
    while t_last < duration:
        emitted = rng.geometric(keep_prob, size=chunk_size)
        if k > 0:
            shelved = rng.negative_binomial(emitted, p_emit)
        else:
            shelved = np.zeros(chunk_size, dtype=np.int64)
        steps = emitted + shelved
        dt = rng.gamma(steps, 1 / r) + rng.gamma(steps, 1 / leave)
        if k > 0:
            dt += np.where(shelved > 0,
                           rng.gamma(np.maximum(shelved, 1), 1 / b), 0.0)
        t = t_last + np.cumsum(dt)
        t_last = float(t[-1])
        times.append(t[t < duration])
    return np.concatenate(times)


def _poisson_times(rng, rate, duration):
    n = rng.poisson(rate * duration)
    return np.sort(rng.uniform(0, duration, n))


def hbt_header(**kwargs):
    kwargs.setdefault("sync_rate", 80e6)
    kwargs.setdefault("micro_resolution", 4.0)
    kwargs.setdefault("macro_resolution", 12.5)
    return StreamHeader(**kwargs)


def simulate_hbt(model, mean_rate, duration, *,
                 seed=0,
                 background_fraction=0.0,
                 poisson=False,
                 header=None,
                 chunk_size=1 << 20,
                 verbose=False):
    """
    Photon stream of a two-detector setup behind a 50/50 beam splitter.

    `mean_rate` is the total detected rate in counts per second, of which
    `background_fraction` is uncorrelated background; `duration` is in
    seconds. With `poisson` the emitter is replaced by a Poisson source of
    the same rate, giving g2 = 1 everywhere.
    """
    if not mean_rate > 0 or not duration > 0:
        raise DomainError("mean_rate and duration must be > 0")
    if not 0 <= background_fraction < 1:
        raise DomainError("background_fraction must lie in [0, 1)")
    if header is None:
        header = hbt_header()
    rng = np.random.default_rng(seed)
    duration_ns = duration * 1e9
    signal_rate = mean_rate * (1 - background_fraction) * 1e-9
    background_rate = mean_rate * background_fraction * 1e-9

    if poisson:
        signal = _poisson_times(rng, signal_rate, duration_ns)
    else:
        rates = three_level_rates(model)
        keep_prob = signal_rate / rates.photon_rate
        if keep_prob > 1:
            raise ModelError("requested rate exceeds the emitter's photon "
                             "rate of {:.3g} counts/s".format(rates.photon_rate * 1e9))
        signal = _detection_times(rng, rates, duration_ns, keep_prob, chunk_size)

    times = np.sort(np.concatenate([signal, _poisson_times(rng, background_rate,
                                                           duration_ns)]))
    channel = rng.integers(0, 2, len(times))

    macro, frac = np.divmod(times, header.macro_resolution)
    micro = np.minimum(np.floor(frac * 1e3 / header.micro_resolution),
                       header.n_micro_channels - 1)
    table = TagTable(np.full(len(times), TagKind.PHOTON), channel,
                     macro.astype(np.int64), micro.astype(np.int64))
    if verbose:
        print("simulated", len(table), "photons,", len(signal), "from the emitter")
    return TagStream(header, table)
