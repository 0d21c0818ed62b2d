import configparser

import numpy as np
import pandas as pd

from .data_structures import ApproachCurve, MASK_NAMES

# TODO: read volumes back from CSV so reconstruct can resume from a file


def load_heightmap(filepath, **kwargs):
    """Sample heights in nm, one CSV row per scan row, no header."""
    heightmap = pd.read_csv(filepath, header=None, engine='python', **kwargs)
    return heightmap.to_numpy(dtype=float)


def write_heightmap(filepath, heightmap):
    pd.DataFrame(np.asarray(heightmap)).to_csv(filepath, header=False, index=False)


def read_approach_curve(filepath, *,
                        height_col=0,
                        rate_col=1,
                        stderr_col=2,
                        **kwargs):
    """
    Approach curve from a CSV with a header row: heights in nm, rates in
    inverse microseconds and, if the column exists, their uncertainties.
    """
    curve = pd.read_csv(filepath, engine='python', **kwargs)
    stderr = None
    if stderr_col is not None and stderr_col < len(curve.columns):
        stderr = curve.iloc[:, stderr_col].to_numpy(dtype=float)
    return ApproachCurve(curve.iloc[:, height_col].to_numpy(dtype=float),
                         curve.iloc[:, rate_col].to_numpy(dtype=float),
                         stderr)


def write_approach_curve(filepath, curve):
    columns = {"height_nm": curve.heights, "rate_per_us": curve.rates}
    if curve.stderr is not None:
        columns["stderr_per_us"] = curve.stderr
    pd.DataFrame(columns).to_csv(filepath, index=False)


def load_materials(filepath, **kwargs):
    """
    Permittivity tables from a CSV with columns
    name, wavelength_nm, eps_real, eps_imag. Returns {name: rows}.
    """
    table = pd.read_csv(filepath, engine='python', **kwargs)
    table.columns = ["name", "wavelength", "eps_real", "eps_imag"]
    materials = {}
    for name, rows in table.groupby("name", sort=False):
        eps = rows.eps_real.to_numpy(dtype=float) + 1j * rows.eps_imag.to_numpy(dtype=float)
        materials[name] = np.stack([rows.wavelength.to_numpy(dtype=float), eps], axis=1)
    return materials


def volume_frame(volume):
    x, y, z = volume.positions()
    return pd.DataFrame({
        "x_nm": x.ravel(),
        "y_nm": y.ravel(),
        "z_nm": z.ravel(),
        "tau_ns": volume.tau.ravel(),
        "stderr_ns": volume.stderr.ravel(),
        "n_photons": volume.n_photons.ravel(),
        "mask": pd.Categorical.from_codes(volume.mask.ravel(),
                                          [MASK_NAMES[c] for c in sorted(MASK_NAMES)]),
    })


def write_volume(filepath, volume):
    """One row per voxel; masked voxels have empty lifetime fields."""
    volume_frame(volume).to_csv(filepath, index=False, na_rep="")


def write_gradient(filepath, gradient):
    defined = gradient.defined.ravel()
    grad = gradient.grad.reshape(-1, 3)[defined]
    pd.DataFrame({
        "x_nm": gradient.x.ravel()[defined],
        "y_nm": gradient.y.ravel()[defined],
        "z_nm": gradient.z.ravel()[defined],
        "dk_dx": grad[:, 0],
        "dk_dy": grad[:, 1],
        "dk_dz": grad[:, 2],
        "magnitude": gradient.magnitude.ravel()[defined],
    }).to_csv(filepath, index=False)


def write_g2(filepath, hist):
    pd.DataFrame({"lag_ns": hist.lags_ns, "g2": hist.g2,
                  "counts": hist.counts}).to_csv(filepath, index=False)


def write_pgm(filepath, image, *, vmin=None, vmax=None):
    """
    16-bit binary PGM of a 2-d image, linearly scaled to [vmin, vmax].
    NaN pixels are written as 0, finite values map to [1, 65535].
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("PGM images must be 2-d")
    finite = np.isfinite(image)
    if vmin is None:
        vmin = float(image[finite].min()) if finite.any() else 0.0
    if vmax is None:
        vmax = float(image[finite].max()) if finite.any() else 1.0
    span = vmax - vmin if vmax > vmin else 1.0
    scaled = np.clip((image - vmin) / span, 0, 1) * 65534 + 1
    pixels = np.where(finite, np.round(scaled), 0).astype(">u2")
    height, width = image.shape
    with open(filepath, "wb") as f:
        f.write("P5\n{} {}\n65535\n".format(width, height).encode("ascii"))
        f.write(pixels.tobytes())


def write_report(filepath, sections):
    """INI report from {section: {key: value}}."""
    report = configparser.ConfigParser()
    for section, values in sections.items():
        report[section] = {key: str(value) for key, value in values.items()}
    with open(filepath, "w") as f:
        report.write(f)
