"""
Immutable inputs of every LDOS evaluation. Lengths are in nm, rates in
inverse microseconds and angles in radians throughout the package.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..exceptions import DomainError


@dataclass(frozen=True)
class Medium:
    rel_permittivity: complex
    rel_permeability: float = 1.0

    def __post_init__(self):
        eps = complex(self.rel_permittivity)
        if not (math.isfinite(eps.real) and math.isfinite(eps.imag)):
            raise DomainError("permittivity must be finite, got {}".format(eps))
        if eps.imag < 0:
            raise DomainError("passive media need Im(eps) >= 0, got {}".format(eps))
        if self.rel_permeability != 1.0:
            raise DomainError("only non-magnetic media (mu = 1) are supported")
        object.__setattr__(self, "rel_permittivity", eps)

    @property
    def eps(self):
        return self.rel_permittivity


VACUUM = Medium(1.0)
GLASS = Medium(2.25)


@dataclass(frozen=True)
class LayeredGeometry:
    """
    Emitter at `emitter_height` inside medium 1, above a half-space of
    medium 2. Medium 1 has to be lossless so that k1 is real.
    """
    emitter_height: float
    medium_emitter: Medium = VACUUM
    medium_substrate: Medium = GLASS
    wavelength: float = 700.0

    def __post_init__(self):
        if not self.emitter_height >= 0:
            raise DomainError("emitter height must be >= 0, got {}".format(
                self.emitter_height))
        if not self.wavelength > 0:
            raise DomainError("wavelength must be > 0, got {}".format(
                self.wavelength))
        eps1 = self.medium_emitter.eps
        if eps1.imag != 0 or eps1.real <= 0:
            raise DomainError("emitter medium must be a lossless dielectric")

    @property
    def eps1(self):
        return self.medium_emitter.eps.real

    @property
    def eps2(self):
        return self.medium_substrate.eps

    @property
    def k1(self):
        return 2 * math.pi * math.sqrt(self.eps1) / self.wavelength

    @property
    def is_homogeneous(self):
        return self.eps2 == complex(self.eps1)

    def at_height(self, height):
        return replace(self, emitter_height=float(height))

    def at_wavelength(self, wavelength, medium_substrate=None):
        if medium_substrate is None:
            medium_substrate = self.medium_substrate
        return replace(self, wavelength=float(wavelength),
                       medium_substrate=medium_substrate)


@dataclass(frozen=True)
class SpectrumModel:
    center: float = 700.0
    std_dev: float = 50.0
    n_samples: int = 21
    # nodes cover center +/- span * std_dev
    span: float = 3.0

    def __post_init__(self):
        if not self.std_dev > 0:
            raise DomainError("spectral std_dev must be > 0")
        if int(self.n_samples) < 1:
            raise DomainError("need at least one spectral node")
        object.__setattr__(self, "n_samples", int(self.n_samples))

    def nodes(self):
        """
        Returns (wavelengths, weights). Nodes are symmetric about the center
        and the Gaussian weights sum to one over the sampled nodes.
        """
        if self.n_samples == 1:
            return np.array([self.center]), np.array([1.0])
        offsets = np.linspace(-self.span, self.span, self.n_samples)
        weights = np.exp(-0.5 * offsets**2)
        weights /= weights.sum()
        return self.center + offsets * self.std_dev, weights


@dataclass(frozen=True)
class EmitterModel:
    orientation: float
    radiative_rate_free: float
    nonradiative_rate: float = 0.0
    spectrum: SpectrumModel = field(default_factory=SpectrumModel)

    def __post_init__(self):
        if not self.radiative_rate_free > 0:
            raise DomainError("free radiative rate must be > 0, got {}".format(
                self.radiative_rate_free))
        if not self.nonradiative_rate >= 0:
            raise DomainError("nonradiative rate must be >= 0, got {}".format(
                self.nonradiative_rate))
        if not 0 <= self.orientation <= math.pi / 2 + 1e-12:
            raise DomainError("orientation must lie in [0, pi/2], got {}".format(
                self.orientation))

    @property
    def k_r0(self):
        return self.radiative_rate_free

    @property
    def k_nr(self):
        return self.nonradiative_rate


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tolerance: float = 1e-9
    s_max: float = 1e6
    min_height: float = 1.0
    envelope: float = 1e-12
    limit: int = 500

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise DomainError("rel_tolerance must be > 0")
        if not self.s_max > 1:
            raise DomainError("s_max must be > 1")
        if not self.min_height >= 0:
            raise DomainError("min_height must be >= 0")

    @property
    def split_point(self):
        # propagating / evanescent boundary
        return 1.0
