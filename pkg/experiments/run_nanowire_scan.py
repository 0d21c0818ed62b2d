"""Scan across a silver wire with the emitter displaced from the probe
apex. The relative-height image shows a lifetime stripe beside the wire;
the topography-corrected slice should not (contrast reduced at least 5x).
At least 90% of the rate gradient arrows within two voxels of the wire
should point towards it. The same check on the noise-free volume shows how
much of any shortfall is fit noise."""
import os
import sys

import numpy as np

import qeflim
from qeflim.cli import plan_from_config, scene_from_config

config = qeflim.RunConfig.from_file(os.path.join("configs", "nanowire.cfg"))
scene = scene_from_config(config)
plan = plan_from_config(config)
emitter = config.emitter()
n_bins = config.get("reconstruct", "n_bins")
min_counts = config.get("reconstruct", "min_counts")
cutoff_ns = config.get("reconstruct", "cutoff_ns")
wire = scene.objects[0]
threads = os.cpu_count()

stream = qeflim.simulate_scan(scene, plan, emitter, threads=threads, verbose=True)
heightmap = qeflim.plan_heightmap(scene, plan)
histograms = qeflim.bin_photons(stream, n_bins, verbose=True)
volume = qeflim.build_volume(histograms, cutoff_ns=cutoff_ns,
                             min_counts=min_counts, threads=threads)
corrected = qeflim.topography_correct(volume, heightmap,
                                      tip_offset=plan.tip_offset,
                                      cutoff_ns=cutoff_ns,
                                      min_counts=min_counts, verbose=True)

closest = volume.quarter_images["closest"]
z_top = 2 * wire.radius
band = qeflim.height_slice(corrected, z_top + 10, z_top + 40,
                           cutoff_ns=cutoff_ns, min_counts=min_counts)
before = qeflim.stripe_contrast(closest)
after = qeflim.stripe_contrast(band)
stripe_removed = after * 5 <= before
print("stripe contrast: relative {:.4f}, corrected {:.4f}".format(before, after))
print("reduced at least 5x: {}".format(stripe_removed))

# voxel x is relative to the scan origin; the emitter sits beside the apex
x_shift = plan.origin[0] + plan.probe_offset[0]
reach = 2 * max(corrected.pitch, corrected.bin_width)
gradient = qeflim.gradient_map(corrected)
fraction, n_near = qeflim.inward_fraction(gradient, wire, reach=reach,
                                          x_shift=x_shift)
print("{} arrows near the wire, {:.3f} point inward".format(n_near, fraction))

truth = qeflim.ground_truth_volume(scene, plan, emitter, n_bins)
truth_corrected = qeflim.topography_correct(truth, heightmap,
                                            tip_offset=plan.tip_offset)
truth_fraction, _ = qeflim.inward_fraction(qeflim.gradient_map(truth_corrected),
                                           wire, reach=reach, x_shift=x_shift)
print("noise-free volume: {:.3f} point inward".format(truth_fraction))

np.save("nanowire_results.npy", {
    "closest_tau": closest.tau[:, :, 0],
    "corrected_tau": corrected.tau,
    "z_centers": corrected.z_centers,
    "band_tau": band.tau[:, :, 0],
    "stripe_before": before,
    "stripe_after": after,
    "inward_fraction": fraction,
    "truth_inward_fraction": truth_fraction,
})
if not (stripe_removed and fraction >= 0.9):
    sys.exit(1)
