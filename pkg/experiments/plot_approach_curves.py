from matplotlib import pyplot as plt
plt.switch_backend('agg')
import math
import numpy as np

import qeflim

plt.rcParams.update({'font.size': 14})

heights = np.linspace(2.0, 700.0, 200)
silver = qeflim.Medium(-20.4 + 0.7j)
substrates = [("glass", qeflim.GLASS), ("silver", silver)]

# lifetime against height for several orientations, QE fixed at 0.8
for name, substrate in substrates:
    plt.figure()
    for phi_deg in [0, 30, 60, 90]:
        emitter = qeflim.EmitterModel(orientation=math.radians(phi_deg),
                                      radiative_rate_free=36.9,
                                      nonradiative_rate=9.2)
        rates = qeflim.approach_curve(heights, substrate, emitter, spectral=False)
        plt.plot(heights, 1e3 / rates, label="{} deg".format(phi_deg))
    plt.xlabel("height (nm)")
    plt.ylabel("lifetime (ns)")
    plt.legend()
    plt.savefig("approach_orientation_{}.pdf".format(name))

# same orientation, several quantum efficiencies at a fixed free lifetime
plt.figure()
total = 45.9
for qe in [0.2, 0.5, 0.8, 1.0]:
    emitter = qeflim.EmitterModel(orientation=math.radians(30.7),
                                  radiative_rate_free=qe * total,
                                  nonradiative_rate=(1 - qe) * total)
    rates = qeflim.approach_curve(heights, qeflim.GLASS, emitter, spectral=False)
    plt.plot(heights, 1e3 / rates, label="QE {}".format(qe))
plt.xlabel("height (nm)")
plt.ylabel("lifetime (ns)")
plt.legend()
plt.savefig("approach_qe_glass.pdf")

# replica fits from run_calibration_replicas.py
results = np.load("calibration_replicas.npy", allow_pickle=True)
plt.figure()
plt.scatter(results["phi_deg"], results["qe"], marker="o")
plt.axvline(30.7, color='k')
plt.axhline(36.9 / 45.9, color='k')
plt.xlabel("orientation (deg)")
plt.ylabel("QE")
plt.savefig("calibration_replicas.pdf")
