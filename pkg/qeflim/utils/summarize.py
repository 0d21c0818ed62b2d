import math

import numpy as np

from .data_structures import MASK_NAMES


def summarize(volume, alert_masked=True):
    """Print the voxel accounting and lifetime range of a volume."""
    ny, nx, nz = volume.shape
    kind = "absolute" if volume.absolute else "relative"
    print("volume of", ny, "x", nx, "pixels and", nz, kind, "layers")

    valid = volume.valid
    if valid.any():
        tau = volume.tau[valid]
        print(int(valid.sum()), "valid voxels, tau from {:.3f} to {:.3f} ns "
              "(median {:.3f})".format(tau.min(), tau.max(), np.median(tau)))

    if alert_masked:
        codes, counts = np.unique(volume.mask[~valid], return_counts=True)
        for code, count in zip(codes, counts):
            print(count, "voxels", MASK_NAMES[code])

    for name, image in sorted(volume.quarter_images.items()):
        if image.valid.any():
            print(name, "quarter: median tau {:.3f} ns".format(
                np.median(image.tau[image.valid])))


def summarize_calibration(result):
    err = result.stderr
    print("k_nr  = {:.4g} +/- {:.2g} /us".format(result.k_nr, err[0]))
    print("k_r0  = {:.4g} +/- {:.2g} /us".format(result.k_r0, err[1]))
    print("phi   = {:.2f} +/- {:.2f} deg".format(math.degrees(result.phi),
                                                math.degrees(err[2])))
    print("QE    = {:.4f}".format(result.qe))
    print("chi^2 = {:.4g} over {} samples".format(result.residual, result.n_samples))


def summarize_g2(result):
    if not result.converged:
        print("g2 fit did not converge")
        return
    print("g2(0) = {:.3f} +/- {:.3f}".format(result.params["g2_zero"],
                                            result.stderr["g2_zero"]))
    verdict = "single emitter" if result.is_single_emitter else "not a single emitter"
    print(verdict)
