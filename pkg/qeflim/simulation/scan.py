"""
Photon-level simulation of a raster scan with an oscillating emitter probe.

Time is slotted by the excitation laser: pixel p owns pulses
[p * n_pulses, (p + 1) * n_pulses). Macro time counts sync periods, micro
time resolves the delay inside one period and wraps with it.
"""

import math
import multiprocessing
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from tqdm import tqdm

from ..exceptions import DomainError, EmptyScanError
from ..ldos import QuadratureConfig, lifetime_ns
from ..tagstream import StreamHeader, TagKind, TagStream, TagTable
from ..tagstream.height import bin_centers, CantileverPhaseModel
from ..utils.data_structures import LifetimeVolume, VALID
from ..utils.misc import pixel_of, pixel_positions, spawn_seeds
from .scene import GroundTruthField


@dataclass(frozen=True)
class BackgroundModel:
    # short-lived component (scatter, substrate autofluorescence), expressed
    # per laser pulse relative to the signal detection probability
    fast_fraction: float = 0.0
    fast_lifetime: float = 0.3
    # uncorrelated counts per second (dark counts, ambient light)
    flat_rate: float = 0.0

    def __post_init__(self):
        if self.fast_fraction < 0 or self.flat_rate < 0:
            raise DomainError("background levels must be >= 0")
        if not self.fast_lifetime > 0:
            raise DomainError("background lifetime must be > 0")


@dataclass(frozen=True)
class ScanPlan:
    nx: int
    ny: int
    pitch: float = 10.0
    # ms per pixel
    dwell: float = 1.0
    amplitude: float = 128.0
    cantilever_freq: float = 70e3
    sync_rate: float = 10e6
    excitation_prob: float = 0.01
    detection_efficiency: float = 1.0
    background: BackgroundModel = field(default_factory=BackgroundModel)
    seed: int = 0
    marker_divisor: int = 4096
    micro_resolution: float = 256.0
    # apex-sample distance at the lowest point of the oscillation
    tip_offset: float = 5.0
    # emitter position relative to the apex, in the scan plane
    probe_offset: tuple = (0.0, 0.0)
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 0 or self.ny < 0:
            raise DomainError("scan dims must be >= 0")
        if not 0 <= self.excitation_prob <= 1:
            raise DomainError("excitation_prob must lie in [0, 1]")
        if not 0 <= self.detection_efficiency <= 1:
            raise DomainError("detection_efficiency must lie in [0, 1]")
        if not self.dwell > 0:
            raise DomainError("dwell must be > 0")
        if not self.amplitude > 0:
            raise DomainError("amplitude must be > 0")
        if self.tip_offset < 0:
            raise DomainError("tip_offset must be >= 0")

    @property
    def n_pixels(self):
        return self.nx * self.ny

    @property
    def sync_period_ns(self):
        return 1e9 / self.sync_rate

    @property
    def pulses_per_pixel(self):
        return max(1, int(round(self.dwell * 1e-3 * self.sync_rate)))

    def header(self):
        return StreamHeader(sync_rate=self.sync_rate,
                            micro_resolution=self.micro_resolution,
                            macro_resolution=self.sync_period_ns,
                            cantilever_freq=self.cantilever_freq,
                            cantilever_amplitude=self.amplitude,
                            marker_divisor=self.marker_divisor,
                            scan_dims=(self.nx, self.ny),
                            pixel_pitch=self.pitch)

    def phase_model(self):
        return CantileverPhaseModel(period=1e9 / self.cantilever_freq,
                                    amplitude=self.amplitude,
                                    marker_divisor=self.marker_divisor)


class _PixelTask(NamedTuple):
    pixel: int
    seed: np.random.SeedSequence
    start_pulse: int
    n_pulses: int
    sync_period: float
    micro_res_ns: float
    n_micro: int
    cantilever_period: float
    amplitude: float
    # rate (per ns) of the emitter along its vertical path, on a height grid
    heights: np.ndarray
    rates: np.ndarray
    p_signal: float
    p_fast: float
    fast_rate: float
    flat_mean: float


def _bernoulli_positions(rng, n, p):
    """Sorted indices of successes in n Bernoulli(p) trials."""
    if p <= 0 or n == 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n, dtype=np.int64)
    chunks = []
    last = -1
    chunk_size = int(n * p * 1.1) + 16
    while last < n:
        gaps = rng.geometric(p, size=chunk_size)
        pos = last + np.cumsum(gaps)
        chunks.append(pos)
        last = int(pos[-1])
    pos = np.concatenate(chunks)
    return pos[pos < n]


def _split_delay(task, excited_pulses, delays):
    macro_off, frac = np.divmod(delays, task.sync_period)
    macro = task.start_pulse + excited_pulses + macro_off.astype(np.int64)
    micro = np.minimum(np.floor(frac / task.micro_res_ns).astype(np.int64),
                       task.n_micro - 1)
    return macro, micro


def _simulate_pixel(task):
    rng = np.random.default_rng(task.seed)

    exc = _bernoulli_positions(rng, task.n_pulses, task.p_signal)
    t_exc = (task.start_pulse + exc) * task.sync_period
    height = 0.5 * task.amplitude * (1 + np.cos(2 * np.pi * t_exc
                                                / task.cantilever_period))
    rate = np.interp(height, task.heights, task.rates)
    delays = rng.exponential(1 / rate)
    macro, micro = _split_delay(task, exc, delays)

    fast = _bernoulli_positions(rng, task.n_pulses, task.p_fast)
    fast_macro, fast_micro = _split_delay(
        task, fast, rng.exponential(1 / task.fast_rate, size=len(fast)))

    n_flat = rng.poisson(task.flat_mean)
    flat_macro = task.start_pulse + rng.integers(0, task.n_pulses, n_flat)
    flat_micro = rng.integers(0, task.n_micro, n_flat)

    return (np.concatenate([macro, fast_macro, flat_macro]),
            np.concatenate([micro, fast_micro, flat_micro]))


def plan_heightmap(scene, plan):
    """Sample height under the probe apex at every pixel, shape (ny, nx)."""
    x, y = pixel_positions(plan.nx, plan.ny, plan.pitch, plan.origin)
    return np.asarray(scene.topography(x, y), dtype=float).reshape(plan.ny, plan.nx)


def _emitter_path(scene, plan, ix, iy, heights, q):
    # emitter position over the oscillation; it never penetrates the sample
    x0, y0 = plan.origin
    x = x0 + ix * plan.pitch
    y = y0 + iy * plan.pitch
    ex = x + plan.probe_offset[0]
    ey = y + plan.probe_offset[1]
    z = scene.topography(x, y) + plan.tip_offset + heights
    z = np.maximum(z, scene.topography(ex, ey) + q.min_height)
    return ex, ey, z


def _marker_table(plan, total_ns):
    n_pix = plan.n_pixels
    n_pulses = plan.pulses_per_pixel
    pixel = np.arange(n_pix)
    pixel_markers = TagTable(np.full(n_pix, TagKind.PIXEL_MARKER),
                             np.zeros(n_pix), pixel * n_pulses,
                             np.zeros(n_pix), pixel)

    spacing = plan.marker_divisor * 1e9 / plan.cantilever_freq
    n_cant = int(math.ceil(total_ns / spacing)) + 2
    t = np.arange(n_cant) * spacing
    macro, frac = np.divmod(t, plan.sync_period_ns)
    micro = np.floor(frac * 1e3 / plan.micro_resolution)
    cantilever_markers = TagTable(np.full(n_cant, TagKind.CANTILEVER_MARKER),
                                  np.zeros(n_cant), macro, micro)
    return TagTable.concatenate([pixel_markers, cantilever_markers])


def simulate_scan(scene, plan, emitter, *,
                  field=None,
                  spectral=False,
                  q=None,
                  n_profile=257,
                  threads=1,
                  verbose=False):
    """
    Simulate every pixel of `plan` over `scene` and return a time-sorted
    TagStream. Each pixel draws from its own child of the master seed, so
    the output does not depend on `threads`.
    """
    if plan.n_pixels == 0:
        raise EmptyScanError("scan has no pixels")
    if q is None:
        q = QuadratureConfig()
    if field is None:
        field = GroundTruthField(scene, emitter, spectral=spectral, q=q,
                                 verbose=verbose)
    header = plan.header()

    n_pulses = plan.pulses_per_pixel
    p_signal = plan.excitation_prob * plan.detection_efficiency
    background = plan.background
    heights = np.linspace(0, plan.amplitude, n_profile)
    seeds = spawn_seeds(plan.seed, plan.n_pixels)

    tasks = []
    for pixel in range(plan.n_pixels):
        iy, ix = pixel_of(pixel, plan.nx)
        ex, ey, z = _emitter_path(scene, plan, ix, iy, heights, q)
        rates = field.rate(np.full(z.shape, ex), np.full(z.shape, ey), z) * 1e-3
        tasks.append(_PixelTask(
            pixel=pixel, seed=seeds[pixel], start_pulse=pixel * n_pulses,
            n_pulses=n_pulses, sync_period=plan.sync_period_ns,
            micro_res_ns=plan.micro_resolution * 1e-3,
            n_micro=header.n_micro_channels,
            cantilever_period=1e9 / plan.cantilever_freq,
            amplitude=plan.amplitude, heights=heights, rates=rates,
            p_signal=p_signal,
            p_fast=min(1.0, p_signal * background.fast_fraction),
            fast_rate=1 / background.fast_lifetime,
            flat_mean=background.flat_rate * plan.dwell * 1e-3))

    if threads == 1:
        results = [_simulate_pixel(task)
                   for task in tqdm(tasks, disable=not verbose)]
    else:
        with multiprocessing.Pool(threads) as pool:
            results = pool.map(_simulate_pixel, tasks)

    macro = np.concatenate([r[0] for r in results])
    micro = np.concatenate([r[1] for r in results])
    photons = TagTable(np.full(len(macro), TagKind.PHOTON), np.zeros(len(macro)),
                       macro, micro)

    total_ns = plan.n_pixels * n_pulses * plan.sync_period_ns
    if len(macro):
        total_ns = max(total_ns, (macro.max() + 1) * plan.sync_period_ns)
    # markers go first so they precede photons with the same timestamp
    records = TagTable.concatenate([_marker_table(plan, total_ns), photons])
    records = records.sorted()
    if verbose:
        print("simulated", len(photons), "photons over", plan.n_pixels, "pixels")
    return TagStream(header, records)


def ground_truth_volume(scene, plan, emitter, n_bins, *,
                        field=None,
                        spectral=False,
                        q=None):
    """
    Noise-free lifetimes at the height-bin centers of every pixel, laid out
    like a reconstructed volume (relative heights).
    """
    if q is None:
        q = QuadratureConfig()
    if field is None:
        field = GroundTruthField(scene, emitter, spectral=spectral, q=q)
    centers = bin_centers(plan.phase_model(), n_bins)
    tau = np.empty((plan.ny, plan.nx, n_bins))
    for iy in range(plan.ny):
        for ix in range(plan.nx):
            ex, ey, z = _emitter_path(scene, plan, ix, iy, centers, q)
            rate = field.rate(np.full(z.shape, ex), np.full(z.shape, ey), z)
            tau[iy, ix] = lifetime_ns(rate)
    mask = np.full(tau.shape, VALID)
    return LifetimeVolume(tau, np.zeros(tau.shape), mask, centers,
                          pitch=plan.pitch,
                          heightmap=plan_heightmap(scene, plan))
