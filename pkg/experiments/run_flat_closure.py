"""Simulate a scan over bare glass and compare the fitted lifetimes with
the noise-free ones. Voxels with at least 10^4 photons should land within
5% of the truth."""
import os
import sys
from timeit import default_timer

import numpy as np

import qeflim
from qeflim.cli import plan_from_config, scene_from_config

config = qeflim.RunConfig.from_file(os.path.join("configs", "flat_glass.cfg"))
scene = scene_from_config(config)
plan = plan_from_config(config)
emitter = config.emitter()
n_bins = config.get("reconstruct", "n_bins")
min_photons = 10**4
threads = os.cpu_count()

start_time = default_timer()
stream = qeflim.simulate_scan(scene, plan, emitter, threads=threads, verbose=True)
print("Simulated in {:.1f} s".format(default_timer() - start_time))

histograms = qeflim.bin_photons(stream, n_bins, verbose=True)
volume = qeflim.build_volume(histograms, min_counts=100, quarters=False,
                             threads=threads)
truth = qeflim.ground_truth_volume(scene, plan, emitter, n_bins)
qeflim.summarize(volume)

bright = volume.valid & (volume.n_photons >= min_photons)
error = np.abs(volume.tau - truth.tau) / truth.tau
print("{} voxels with >= {} photons".format(int(bright.sum()), min_photons))
print("max relative error {:.4f}".format(np.max(error[bright])))
closed = bool(bright.any() and np.all(error[bright] < 0.05))
print("within 5%: {}".format(closed))

# error against photon count, for plotting
results = np.stack([volume.n_photons[volume.valid], error[volume.valid]])
np.save("flat_closure_results.npy", results)
if not closed:
    sys.exit(1)
