"""
Sample geometry and the ground-truth decay rate it imposes.

A scene is a substrate filling z < 0 with objects resting on it: horizontal
cylinders (nanowires) and spheres. An emitter's local decay rate is taken
from the planar model evaluated at the distance to the nearest surface,
over that surface's material.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import DomainError
from ..ldos import (LayeredGeometry, Medium, QuadratureConfig, ldos_parallel,
                    ldos_perpendicular, mix_components, rho_components,
                    spectral_average)
from ..ldos.rates import decay_rate, lifetime_ns


class MaterialTable:
    """
    Named relative permittivities. An entry is either one complex value or
    a table of (wavelength nm, permittivity) pairs, interpolated linearly
    in wavelength and clamped at the table ends.
    """

    def __init__(self, entries=None):
        self._entries = {"vacuum": 1.0, "air": 1.0, "glass": 2.25}
        for name, value in (entries or {}).items():
            self.add(name, value)

    def add(self, name, value):
        if np.ndim(value) == 0:
            Medium(complex(value))
            self._entries[name] = complex(value)
            return
        table = np.asarray(value, dtype=complex)
        if table.ndim != 2 or table.shape[1] != 2 or len(table) < 1:
            raise DomainError("material {!r}: need (wavelength, eps) rows".format(name))
        order = np.argsort(table[:, 0].real)
        table = table[order]
        for eps in table[:, 1]:
            Medium(eps)
        self._entries[name] = (table[:, 0].real, table[:, 1])

    def __contains__(self, name):
        return name in self._entries

    def names(self):
        return list(self._entries)

    def medium(self, name, wavelength):
        if name not in self._entries:
            raise DomainError("unknown material {!r}".format(name))
        entry = self._entries[name]
        if isinstance(entry, tuple):
            wl, eps = entry
            value = (np.interp(wavelength, wl, eps.real)
                     + 1j * np.interp(wavelength, wl, eps.imag))
            return Medium(complex(value))
        return Medium(entry)

    def dispersion(self, name):
        """Callable wavelength -> Medium for `name`."""
        return lambda wavelength: self.medium(name, wavelength)

    def resolve(self, name):
        """A fixed Medium when `name` is non-dispersive, else `dispersion`."""
        if name in self._entries and not isinstance(self._entries[name], tuple):
            return Medium(self._entries[name])
        return self.dispersion(name)


@dataclass(frozen=True)
class Cylinder:
    """
    Horizontal cylinder lying on the substrate. The axis passes through
    (x0, y0) at height `radius` and points along `angle` (radians from +x).
    """
    x0: float
    y0: float
    radius: float
    angle: float = math.pi / 2
    material: str = "silver"

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("cylinder radius must be > 0")

    def _lateral(self, x, y):
        # signed distance from the axis, measured in the substrate plane
        return (-(x - self.x0) * math.sin(self.angle)
                + (y - self.y0) * math.cos(self.angle))

    def top(self, x, y):
        d = self._lateral(x, y)
        inside = np.abs(d) < self.radius
        return np.where(inside,
                        self.radius + np.sqrt(np.clip(self.radius**2 - d**2, 0, None)),
                        -np.inf)

    def distance(self, x, y, z):
        d = self._lateral(x, y)
        return np.hypot(d, z - self.radius) - self.radius


@dataclass(frozen=True)
class Sphere:
    cx: float
    cy: float
    radius: float
    material: str = "gold"

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("sphere radius must be > 0")

    def top(self, x, y):
        r2 = (x - self.cx)**2 + (y - self.cy)**2
        inside = r2 < self.radius**2
        return np.where(inside,
                        self.radius + np.sqrt(np.clip(self.radius**2 - r2, 0, None)),
                        -np.inf)

    def distance(self, x, y, z):
        return np.sqrt((x - self.cx)**2 + (y - self.cy)**2
                       + (z - self.radius)**2) - self.radius


class Scene:
    """
    A substrate with wires and spheres resting on it, the table their
    material names resolve through, and the medium above.
    """

    def __init__(self, substrate="glass", objects=None, materials=None,
                 medium=None):
        self.substrate = substrate
        self.objects = list(objects) if objects is not None else []
        self.materials = materials if materials is not None else MaterialTable()
        self.medium = medium if medium is not None else Medium(1.0)
        for name in self.material_names():
            if name not in self.materials:
                raise DomainError("unknown material {!r}".format(name))

    def material_names(self):
        """Substrate first, then each object's material in order."""
        return [self.substrate] + [obj.material for obj in self.objects]

    def topography(self, x, y):
        """Height z_top(x, y) of the sample surface in nm."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float),
                                   np.asarray(y, dtype=float))
        z = np.zeros(x.shape)
        for obj in self.objects:
            z = np.maximum(z, obj.top(x, y))
        if z.ndim == 0:
            return float(z)
        return z

    def surface_distances(self, x, y, z):
        """
        Distance to the nearest surface and the index (into
        `material_names()`) of the surface it belongs to. Points below the
        topography raise a DomainError.
        """
        x, y, z = np.broadcast_arrays(np.asarray(x, dtype=float),
                                      np.asarray(y, dtype=float),
                                      np.asarray(z, dtype=float))
        below = z < self.topography(x, y) - 1e-9
        if np.any(below):
            raise DomainError("{} point(s) below the sample topography".format(
                int(np.sum(below))))
        dist = z.copy()
        which = np.zeros(z.shape, dtype=np.int64)
        for idx, obj in enumerate(self.objects, start=1):
            d = obj.distance(x, y, z)
            closer = d < dist
            dist = np.where(closer, d, dist)
            which = np.where(closer, idx, which)
        return np.clip(dist, 0, None), which

    def nearest_surface(self, point):
        x, y, z = point
        dist, which = self.surface_distances(x, y, z)
        return float(dist), self.material_names()[int(which)]


def local_decay_rate(scene, emitter, point, *,
                     spectral=False,
                     q=None,
                     model="nv",
                     weighting="linear"):
    """
    Decay rate (inverse microseconds) of `emitter` at `point` = (x, y, z),
    from the planar model at the distance to the nearest surface. `model`
    and `weighting` pick the orientation mixing, see `mix_components`.
    """
    if q is None:
        q = QuadratureConfig()
    distance, material = scene.nearest_surface(point)
    phi = emitter.orientation

    def rho_at(wavelength):
        geometry = LayeredGeometry(distance, scene.medium,
                                   scene.materials.medium(material, wavelength),
                                   wavelength)
        return float(mix_components(ldos_parallel(geometry, q),
                                    ldos_perpendicular(geometry, q), phi,
                                    weighting=weighting, model=model))

    if spectral:
        rho = spectral_average(rho_at, emitter.spectrum)
    else:
        rho = rho_at(emitter.spectrum.center)
    return decay_rate(emitter, rho)


class GroundTruthField:
    """
    Decay rate of one emitter anywhere in a scene, from per-material tables
    of the planar model on a logarithmic distance grid. Distances below the
    quadrature floor are clamped to it, beyond the table end the last value
    is used.
    """

    def __init__(self, scene, emitter, *,
                 spectral=False,
                 q=None,
                 model="nv",
                 weighting="linear",
                 n_table=160,
                 max_distance=None,
                 verbose=False):
        if q is None:
            q = QuadratureConfig()
        self.scene = scene
        self.emitter = emitter
        wavelength = emitter.spectrum.center
        if max_distance is None:
            max_distance = 10 * wavelength
        min_distance = max(q.min_height, 1e-3)
        self.distances = np.geomspace(min_distance, max_distance, n_table)
        self._log_distances = np.log(self.distances)

        spectrum = emitter.spectrum if spectral else None
        self.tables = {}
        for name in dict.fromkeys(scene.material_names()):
            rho_par, rho_perp = rho_components(
                self.distances, scene.materials.resolve(name),
                medium_emitter=scene.medium, wavelength=wavelength,
                spectrum=spectrum, q=q)
            rho = mix_components(rho_par, rho_perp, emitter.orientation,
                                 weighting=weighting, model=model)
            self.tables[name] = decay_rate(emitter, rho)
            if verbose:
                print("rate table for", name, "done")

        self._by_index = [self.tables[name] for name in scene.material_names()]

    def rate(self, x, y, z):
        """Decay rate in inverse microseconds at the given points."""
        dist, which = self.scene.surface_distances(x, y, z)
        logd = np.log(np.clip(dist, self.distances[0], None))
        out = np.empty(dist.shape)
        for idx in np.unique(which):
            sel = which == idx
            out[sel] = np.interp(logd[sel], self._log_distances,
                                 self._by_index[idx])
        if out.ndim == 0:
            return float(out)
        return out

    def lifetime(self, x, y, z):
        return lifetime_ns(self.rate(x, y, z))

    def rate_profile(self, x, y, heights, *, tip_offset=0.0):
        """
        Rates along the vertical line over (x, y) at `heights` above the
        local surface plus `tip_offset`.
        """
        z = self.scene.topography(x, y) + tip_offset + np.asarray(heights, dtype=float)
        return self.rate(np.full(z.shape, x), np.full(z.shape, y), z)
