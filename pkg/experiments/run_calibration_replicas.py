"""Fit noisy synthetic approach curves over glass. Every replica averages
repeated approach curves with 2% multiplicative noise each, the way
repeated scans are averaged before fitting. Recovered k_nr, k_r0 and phi
should be within 10% of the truth and the QE within 0.05 in at least 9 of
10 replicas."""
import math
import sys
from multiprocessing import Pool, cpu_count

import numpy as np
import pandas as pd

import qeflim

n_replicas = 10
n_repeats = 100
noise = 0.02
heights = np.linspace(5.0, 1400.0, 280)
emitter = qeflim.EmitterModel(orientation=math.radians(30.7),
                              radiative_rate_free=36.9, nonradiative_rate=9.0)
spectrum = qeflim.SpectrumModel()


def run_replica(seed):
    curves = [qeflim.synthetic_curve(heights, qeflim.GLASS, emitter, noise=noise,
                                     seed=seed * n_repeats + i)
              for i in range(n_repeats)]
    curve = qeflim.average_approach_curves(curves)
    result = qeflim.fit_approach_curve(curve, qeflim.GLASS, spectrum=spectrum)
    row = result.as_dict()
    row["seed"] = seed
    return row


if __name__ == "__main__":
    with Pool(min(n_replicas, cpu_count())) as pool:
        rows = pool.map(run_replica, range(n_replicas))
    results = pd.DataFrame(rows)

    qe_true = qeflim.quantum_efficiency(emitter)
    passed = ((np.abs(results.k_r0_per_us / 36.9 - 1) < 0.1)
              & (np.abs(results.k_nr_per_us / 9.0 - 1) < 0.1)
              & (np.abs(results.phi_deg / 30.7 - 1) < 0.1)
              & (np.abs(results.qe - qe_true) < 0.05))
    results["passed"] = passed
    print(results[["seed", "k_nr_per_us", "k_r0_per_us", "phi_deg", "qe",
                   "chi_square", "passed"]])
    print("{} of {} replicas within tolerance".format(int(passed.sum()), n_replicas))
    np.save("calibration_replicas.npy", results.to_records(index=False))
    if passed.sum() < 9:
        sys.exit(1)
