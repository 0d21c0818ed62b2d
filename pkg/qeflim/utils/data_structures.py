"""
Containers passed between the reconstruction, calibration and output
stages. Derived quantities are computed lazily and cached on first access.
"""

from typing import NamedTuple, Optional

import numpy as np

from ..exceptions import DomainError, ShapeError
from ..ldos.rates import rate_per_us as lifetime_to_rate

# Voxel mask codes
VALID = 0
INSUFFICIENT_COUNTS = 1
BELOW_SURFACE = 2
UNREACHED = 3
NOT_CONVERGED = 4

MASK_NAMES = {
    VALID: "valid",
    INSUFFICIENT_COUNTS: "insufficient_counts",
    BELOW_SURFACE: "below_surface",
    UNREACHED: "unreached",
    NOT_CONVERGED: "not_converged",
}


class PixelHistograms:
    """
    Micro-time histograms per (pixel row, pixel column, height bin).

    counts has shape (ny, nx, n_bins, n_channels). `bin_heights` are the bin
    centers in nm above the lowest point of the oscillation.
    """

    def __init__(self, counts, channel_width_ns, amplitude, *,
                 pitch=1.0, n_photons=None, n_excluded=0):
        self.counts = np.asarray(counts)
        if self.counts.ndim != 4:
            raise ShapeError("histograms need shape (ny, nx, n_bins, n_channels)")
        self.ny, self.nx, self.n_bins, self.n_channels = self.counts.shape
        self.channel_width_ns = channel_width_ns
        self.amplitude = amplitude
        self.pitch = pitch
        self.n_excluded = n_excluded
        if n_photons is None:
            n_photons = int(self.counts.sum()) + n_excluded
        self.n_photons = n_photons

        self._pixel_counts = None
        self._bin_counts = None
        self._pooled = None

    @property
    def bin_width(self):
        return self.amplitude / self.n_bins

    @property
    def bin_heights(self):
        return (np.arange(self.n_bins) + 0.5) * self.bin_width

    @property
    def n_binned(self):
        return int(self.pixel_counts.sum())

    @property
    def pixel_counts(self):
        if self._pixel_counts is None:
            self._pixel_counts = self.counts.sum(axis=(2, 3))
        return self._pixel_counts

    @property
    def bin_counts(self):
        if self._bin_counts is None:
            self._bin_counts = self.counts.sum(axis=(0, 1, 3))
        return self._bin_counts

    @property
    def pooled(self):
        """Micro-time histogram of every binned photon."""
        if self._pooled is None:
            self._pooled = self.counts.sum(axis=(0, 1, 2))
        return self._pooled

    def __add__(self, other):
        if self.counts.shape != other.counts.shape:
            raise ShapeError("cannot add histograms of shape {} and {}".format(
                self.counts.shape, other.counts.shape))
        return PixelHistograms(self.counts + other.counts,
                               self.channel_width_ns, self.amplitude,
                               pitch=self.pitch,
                               n_photons=self.n_photons + other.n_photons,
                               n_excluded=self.n_excluded + other.n_excluded)


class LifetimeFit(NamedTuple):
    tau: float
    amplitude: float
    offset: float
    stderr_tau: float
    n_photons: int
    converged: bool


class LifetimeVolume:
    """
    Grid (ny, nx, nz) of lifetime fits with a voxel mask.

    `z_centers` are bin centers in nm; relative to the lowest point of the
    oscillation unless `absolute` is set, in which case they are sample
    coordinates. Masked voxels hold NaN lifetimes. `histograms`, when kept,
    has shape (ny, nx, nz, n_channels).
    """

    def __init__(self, tau, stderr, mask, z_centers, *,
                 amplitude=None, offset=None, n_photons=None, converged=None,
                 pitch=1.0, absolute=False, heightmap=None, histograms=None,
                 channel_width_ns=None):
        self.tau = np.array(tau, dtype=float)
        self.stderr = np.array(stderr, dtype=float)
        self.mask = np.asarray(mask, dtype=np.int8)
        shape = self.tau.shape
        if len(shape) != 3 or self.stderr.shape != shape or self.mask.shape != shape:
            raise ShapeError("tau, stderr and mask need one (ny, nx, nz) shape")
        self.z_centers = np.asarray(z_centers, dtype=float)
        if self.z_centers.shape != (shape[2],):
            raise ShapeError("need one z center per layer")

        def _or_default(arr, fill, dtype):
            if arr is None:
                return np.full(shape, fill, dtype=dtype)
            return np.asarray(arr, dtype=dtype)

        self.amplitude = _or_default(amplitude, np.nan, float)
        self.offset = _or_default(offset, np.nan, float)
        self.n_photons = _or_default(n_photons, 0, np.int64)
        self.converged = _or_default(converged, True, bool)
        self.pitch = pitch
        self.absolute = absolute
        self.heightmap = heightmap
        self.histograms = histograms
        self.channel_width_ns = channel_width_ns
        self.quarter_images = {}

        # masked voxels carry no lifetime value
        masked = self.mask != VALID
        self.tau[masked] = np.nan
        self.stderr[masked] = np.nan

        self._rate = None

    @classmethod
    def from_fit_arrays(cls, fits, mask, z_centers, **kwargs):
        return cls(fits["tau"], fits["stderr"], mask, z_centers,
                   amplitude=fits["amplitude"], offset=fits["offset"],
                   n_photons=fits["n_photons"], converged=fits["converged"],
                   **kwargs)

    @property
    def shape(self):
        return self.tau.shape

    @property
    def bin_width(self):
        if len(self.z_centers) > 1:
            return float(self.z_centers[1] - self.z_centers[0])
        return np.nan

    @property
    def valid(self):
        return self.mask == VALID

    @property
    def rate_per_us(self):
        """Decay rate k = 1/tau in inverse microseconds (NaN where masked)."""
        if self._rate is None:
            self._rate = lifetime_to_rate(self.tau)
        return self._rate

    def fit_at(self, iy, ix, iz):
        return LifetimeFit(self.tau[iy, ix, iz], self.amplitude[iy, ix, iz],
                           self.offset[iy, ix, iz], self.stderr[iy, ix, iz],
                           int(self.n_photons[iy, ix, iz]),
                           bool(self.converged[iy, ix, iz]))

    def subvolume(self, rows=slice(None), cols=slice(None), layers=slice(None)):
        """Slice the volume, keeping everything per-voxel consistent."""
        index = (rows, cols, layers)
        histograms = None
        if self.histograms is not None:
            histograms = self.histograms[index]
        heightmap = None
        if self.heightmap is not None:
            heightmap = np.asarray(self.heightmap)[rows, cols]
        return LifetimeVolume(
            self.tau[index], self.stderr[index], self.mask[index],
            self.z_centers[layers], amplitude=self.amplitude[index],
            offset=self.offset[index], n_photons=self.n_photons[index],
            converged=self.converged[index], pitch=self.pitch,
            absolute=self.absolute, heightmap=heightmap,
            histograms=histograms, channel_width_ns=self.channel_width_ns)

    def positions(self):
        """(x, y, z) coordinate grids in nm, each of shape (ny, nx, nz)."""
        ny, nx, nz = self.shape
        y, x, z = np.meshgrid(np.arange(ny) * self.pitch,
                              np.arange(nx) * self.pitch,
                              self.z_centers, indexing="ij")
        return x, y, z


class GradientMap:
    """
    Decay-rate gradient in inverse microseconds per nm. `grad` has shape
    (ny, nx, nz, 3) holding the (x, y, z) components; `defined` marks the
    voxels that carry an arrow.
    """

    def __init__(self, grad, defined, x, y, z):
        self.grad = np.asarray(grad, dtype=float)
        self.defined = np.asarray(defined, dtype=bool)
        self.x = x
        self.y = y
        self.z = z
        self._magnitude = None

    @property
    def magnitude(self):
        if self._magnitude is None:
            self._magnitude = np.linalg.norm(self.grad, axis=-1)
        return self._magnitude

    @property
    def direction(self):
        """Unit vectors of the defined arrows (NaN elsewhere)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.grad / self.magnitude[..., None]


class LagHistogram(NamedTuple):
    lags_ns: np.ndarray
    counts: np.ndarray
    expected: np.ndarray
    g2: np.ndarray
    bin_ns: float


class G2Result(NamedTuple):
    lags_ns: np.ndarray
    g2: np.ndarray
    counts: np.ndarray
    params: dict
    stderr: dict
    converged: bool
    is_single_emitter: Optional[bool]

    @property
    def g2_zero(self):
        return self.params.get("g2_zero", np.nan)


class ApproachCurve:
    """
    Decay rate versus emitter-surface distance. Heights in nm, rates and
    their uncertainties in inverse microseconds.
    """

    def __init__(self, heights, rates, stderr=None):
        self.heights = np.asarray(heights, dtype=float)
        self.rates = np.asarray(rates, dtype=float)
        if stderr is not None:
            stderr = np.asarray(stderr, dtype=float)
            if np.all(np.isnan(stderr)):
                stderr = None
        self.stderr = stderr
        if self.rates.shape != self.heights.shape or self.heights.ndim != 1:
            raise ShapeError("heights and rates need matching 1-d shapes")
        if self.stderr is not None and self.stderr.shape != self.heights.shape:
            raise ShapeError("stderr needs the shape of heights")
        if np.any(np.diff(self.heights) <= 0):
            raise DomainError("approach-curve heights must be strictly increasing")
        if np.any(self.rates <= 0):
            raise DomainError("approach-curve rates must be > 0")

    def __len__(self):
        return len(self.heights)

    @property
    def span(self):
        if len(self.heights) == 0:
            return 0.0
        return float(self.heights[-1] - self.heights[0])

    @property
    def weights(self):
        """Inverse standard deviations, or ones when none are known."""
        if self.stderr is None or np.any(~(self.stderr > 0)):
            return np.ones_like(self.rates)
        return 1 / self.stderr


class CalibrationResult:
    """Fitted emitter parameters with their covariance over (k_nr, k_r0, phi)."""

    def __init__(self, k_nr, k_r0, phi, qe, residual, covariance, *,
                 model="nv", n_samples=0):
        self.k_nr = k_nr
        self.k_r0 = k_r0
        self.phi = phi
        self.qe = qe
        self.residual = residual
        self.covariance = np.asarray(covariance, dtype=float)
        self.model = model
        self.n_samples = n_samples

    @property
    def stderr(self):
        """1-sigma uncertainties of (k_nr, k_r0, phi)."""
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def as_dict(self):
        err = self.stderr
        return {
            "k_nr_per_us": self.k_nr,
            "k_r0_per_us": self.k_r0,
            "phi_rad": self.phi,
            "phi_deg": np.degrees(self.phi),
            "qe": self.qe,
            "chi_square": self.residual,
            "stderr_k_nr_per_us": err[0],
            "stderr_k_r0_per_us": err[1],
            "stderr_phi_rad": err[2],
            "model": self.model,
            "n_samples": self.n_samples,
        }
