from matplotlib import pyplot as plt
plt.switch_backend('agg')
import numpy as np

plt.rcParams.update({'font.size': 14})

results = np.load("nanowire_results.npy", allow_pickle=True).item()

fig, axes = plt.subplots(ncols=2, figsize=(10, 4))
for ax, key, title in zip(axes, ["closest_tau", "band_tau"],
                          ["closest quarter", "corrected slice"]):
    im = ax.imshow(results[key], origin='lower', cmap='viridis')
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="lifetime (ns)")
plt.savefig("nanowire_images.pdf")

# x-z section of the first scan row
plt.figure()
section = results["corrected_tau"][0].T
z = results["z_centers"]
plt.imshow(section, origin='lower', aspect='auto', cmap='viridis',
           extent=[0, section.shape[1], z[0], z[-1]])
plt.colorbar(label="lifetime (ns)")
plt.xlabel("pixel")
plt.ylabel("z (nm)")
plt.savefig("nanowire_xz.pdf")

errors = np.load("flat_closure_results.npy")
plt.figure()
plt.scatter(errors[0], errors[1], marker=".")
plt.xscale("log")
plt.axhline(0.05, color='k')
plt.xlabel("photons per voxel")
plt.ylabel("relative lifetime error")
plt.savefig("flat_closure_errors.pdf")
