"""Correlate simulated two-detector streams. The three-level emitter with
background set for g2(0) = 0.3 should fit to g2(0) in [0.25, 0.35] at
about 10^7 pairs; a Poisson source should stay flat at 1. Exits nonzero
when either check fails."""
import os
import sys

import numpy as np

import qeflim

config = qeflim.RunConfig.from_file(os.path.join("configs", "hbt.cfg"))
h = config.section("hbt")
model = qeflim.ThreeLevelModel(h["bunching_amplitude"], h["antibunching_time"],
                               h["bunching_time"])
background_fraction = qeflim.background_for_g2_zero(h["g2_zero"])
window_ns = 300.0
bin_ns = 1.0
n_segments = 9


def correlate(poisson):
    # segments are independent streams; pairs across their joins are dropped
    counts = expected = None
    for segment in range(n_segments):
        stream = qeflim.simulate_hbt(model, h["mean_rate"], h["duration"],
                                     seed=h["seed"] + segment,
                                     background_fraction=background_fraction,
                                     poisson=poisson)
        hist = qeflim.g2_correlate(stream, window_ns=window_ns, bin_ns=bin_ns)
        if counts is None:
            counts, expected = hist.counts.copy(), hist.expected.copy()
        else:
            counts += hist.counts
            expected += hist.expected
    return qeflim.LagHistogram(hist.lags_ns, counts, expected, counts / expected,
                               bin_ns)


emitter_hist = correlate(poisson=False)
result = qeflim.g2_fit(emitter_hist)
qeflim.summarize_g2(result)
print("{} pairs, g2(0) = {:.3f}".format(int(emitter_hist.counts.sum()), result.g2_zero))
g2_ok = 0.25 <= result.g2_zero <= 0.35 and result.is_single_emitter
print("g2(0) in [0.25, 0.35]: {}".format(0.25 <= result.g2_zero <= 0.35))

poisson_hist = correlate(poisson=True)
far = np.abs(poisson_hist.lags_ns) > 200
mean_far = poisson_hist.g2[far].mean()
flat_ok = 0.98 <= mean_far <= 1.02
print("Poisson long-lag mean {:.4f}, in [0.98, 1.02]: {}".format(mean_far, flat_ok))

np.save("hbt_results.npy", np.stack([emitter_hist.lags_ns, emitter_hist.g2,
                                     poisson_hist.g2]))
if not (g2_ok and flat_ok):
    sys.exit(1)
