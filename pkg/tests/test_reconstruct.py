import math

import numpy as np
import pytest

from qeflim.exceptions import (ChannelError, CoverageError, DomainError,
                               ExcludedPhotonsWarning, FormatError, ShapeError)
from qeflim.ldos import EmitterModel
from qeflim.reconstruct.lifetime_fit import _projected_gradient
from qeflim.reconstruct import (accumulate_histograms, bin_photons,
                                build_volume, fit_lifetime, fit_window,
                                g2_correlate, g2_fit, g2_model, gradient_map,
                                height_slice, inward_fraction, pooled_decay,
                                rate_enhancement, stripe_contrast,
                                topography_correct, xz_section)
from qeflim.simulation import (Cylinder, GroundTruthField, MaterialTable,
                               ScanPlan, Scene, ground_truth_volume,
                               hbt_header, simulate_scan)
from qeflim.tagstream import StreamHeader, TagKind, TagStream, TagTable
from qeflim.utils import (BELOW_SURFACE, INSUFFICIENT_COUNTS, UNREACHED, VALID,
                          LagHistogram, LifetimeVolume, PixelHistograms)

WIDTH = 0.256
N_CHANNELS = 391


def decay_curve(tau, amplitude, offset=0.0, n_channels=N_CHANNELS, width=WIDTH):
    t = (np.arange(n_channels) + 0.5) * width
    return amplitude * np.exp(-t / tau) + offset


def manual_stream(records, scan_dims=(1, 1)):
    return TagStream(StreamHeader(scan_dims=scan_dims), TagTable.from_records(records))


def test_bin_photons_conserves_photons():
    emitter = EmitterModel(orientation=math.radians(30.7),
                           radiative_rate_free=36.9, nonradiative_rate=9.0)
    field = GroundTruthField(Scene(), emitter)
    plan = ScanPlan(nx=2, ny=2, dwell=0.2, excitation_prob=0.05,
                    marker_divisor=4, seed=5)
    stream = simulate_scan(Scene(), plan, emitter, field=field)
    hist = bin_photons(stream, 8)

    assert hist.counts.shape == (2, 2, 8, N_CHANNELS)
    assert hist.n_photons == len(stream.records.photons)
    assert hist.n_excluded == 0
    assert hist.n_binned == hist.n_photons
    assert hist.pixel_counts.sum() == hist.bin_counts.sum() == hist.pooled.sum()
    # equal-width bins see the arcsine dwell profile
    assert hist.bin_counts[0] > hist.bin_counts[3]


def test_photons_belong_to_the_preceding_pixel_marker():
    stream = manual_stream([
        (TagKind.CANTILEVER_MARKER, 0, 0, 0, 0),
        (TagKind.PIXEL_MARKER, 0, 0, 0, 0),
        (TagKind.PHOTON, 0, 1, 10, 0),
        (TagKind.PIXEL_MARKER, 0, 5, 0, 1),
        (TagKind.PHOTON, 1, 6, 20, 0),
        (TagKind.PHOTON, 0, 7, 20, 0),
    ], scan_dims=(2, 1))
    hist = bin_photons(stream, 4)
    assert hist.counts[0, 0, :, 10].sum() == 1
    assert hist.counts[0, 1, :, 20].sum() == 2
    assert hist.n_binned == 3


def test_photons_before_the_first_pixel_marker_are_excluded():
    stream = manual_stream([
        (TagKind.CANTILEVER_MARKER, 0, 0, 0, 0),
        (TagKind.PHOTON, 0, 1, 10, 0),
        (TagKind.PIXEL_MARKER, 0, 2, 0, 0),
        (TagKind.PHOTON, 0, 3, 10, 0),
        (TagKind.PHOTON, 0, 4, 12, 0),
    ])
    with pytest.warns(ExcludedPhotonsWarning):
        hist = bin_photons(stream, 4)
    assert hist.n_excluded == 1
    assert hist.n_binned == 2
    assert hist.n_photons == 3


def test_binning_errors():
    no_cantilever = manual_stream([(TagKind.PIXEL_MARKER, 0, 0, 0, 0),
                                   (TagKind.PHOTON, 0, 1, 10, 0)])
    with pytest.raises(CoverageError):
        bin_photons(no_cantilever, 4)
    beyond = manual_stream([(TagKind.CANTILEVER_MARKER, 0, 0, 0, 0),
                            (TagKind.PIXEL_MARKER, 0, 0, 0, 3),
                            (TagKind.PHOTON, 0, 1, 10, 0)])
    with pytest.raises(FormatError):
        bin_photons(beyond, 4)
    with pytest.raises(ShapeError):
        bin_photons(beyond, 0)
    late = manual_stream([(TagKind.CANTILEVER_MARKER, 0, 0, 0, 0),
                          (TagKind.PIXEL_MARKER, 0, 0, 0, 0),
                          (TagKind.PHOTON, 0, 1, N_CHANNELS, 0)], scan_dims=(2, 1))
    with pytest.raises(FormatError):
        bin_photons(late, 4)


def test_accumulate_and_pool():
    counts = np.ones((1, 2, 3, 5), dtype=np.int64)
    hist = PixelHistograms(counts, WIDTH, 90.0)
    total = accumulate_histograms([hist, hist])
    assert np.array_equal(total.counts, 2 * counts)
    assert total.n_photons == 2 * hist.n_photons
    assert list(pooled_decay(total)) == [12] * 5
    assert list(pooled_decay(total, bins=[0])) == [4] * 5
    assert np.allclose(hist.bin_heights, [15.0, 45.0, 75.0])
    with pytest.raises(ShapeError):
        hist + PixelHistograms(np.ones((1, 1, 3, 5)), WIDTH, 90.0)
    with pytest.raises(ShapeError):
        accumulate_histograms([])


def test_fit_window():
    idx, t = fit_window(N_CHANNELS, WIDTH, 5.0)
    assert idx[0] == 20
    assert idx[-1] == N_CHANNELS - 1
    assert t[0] == pytest.approx(0.5 * WIDTH)


def test_noiseless_fit_is_exact():
    fit = fit_lifetime(decay_curve(20.0, 1000.0, 5.0), WIDTH)
    assert fit.converged
    assert fit.tau == pytest.approx(20.0, rel=1e-4)
    assert fit.offset == pytest.approx(5.0, rel=1e-3)
    assert fit.stderr_tau > 0


def test_fit_uncertainty_coverage():
    rng = np.random.default_rng(11)
    expected = decay_curve(15.0, 40.0, 0.5)
    fits = [fit_lifetime(rng.poisson(expected), WIDTH) for _ in range(300)]
    fits = [fit for fit in fits if fit.converged]
    assert len(fits) >= 295
    hits = [abs(fit.tau - 15.0) < fit.stderr_tau for fit in fits]
    estimates = [fit.tau for fit in fits]
    assert 0.6 <= np.mean(hits) <= 0.77
    assert np.mean(estimates) == pytest.approx(15.0, rel=0.02)


def background_free_replicas(n_photons, n_replicas, seed, tau=20.0):
    # amplitude per channel for n_photons over the whole histogram
    expected = decay_curve(tau, n_photons * WIDTH / tau)
    rng = np.random.default_rng(seed)
    return [fit_lifetime(rng.poisson(expected), WIDTH) for _ in range(n_replicas)]


@pytest.mark.parametrize("n_photons", [2500, 10000])
def test_background_free_fits_converge(n_photons):
    fits = background_free_replicas(n_photons, 200, seed=n_photons)
    assert all(fit.converged for fit in fits)
    within = [abs(fit.tau - 20.0) < 3 * fit.stderr_tau for fit in fits]
    assert np.mean(within) >= 0.95
    # the offset may go below zero as long as the expected counts stay positive
    offsets = np.array([fit.offset for fit in fits])
    assert (offsets < 0).any()


def test_background_free_pulls_are_standard():
    fits = background_free_replicas(10000, 300, seed=21)
    pulls = np.array([(fit.tau - 20.0) / fit.stderr_tau
                      for fit in fits if fit.converged])
    assert len(pulls) == 300
    assert abs(np.mean(pulls)) < 0.2
    assert 0.7 <= np.var(pulls) <= 1.35


def test_projected_gradient_ignores_active_bounds():
    bounds = [(0.0, 1.0), (0.0, None), (None, 2.0)]
    x = np.array([0.0, 0.0, 2.0])
    grad = _projected_gradient(x, [3.0, -1.0, -2.0], bounds)
    assert list(grad) == [0.0, -1.0, 0.0]
    assert list(_projected_gradient(np.array([0.5, 1.0, 1.0]), [3.0, 1.0, -2.0],
                                    bounds)) == [3.0, 1.0, -2.0]


def test_flat_histogram_does_not_converge():
    fit = fit_lifetime(np.full(N_CHANNELS, 10.0), WIDTH)
    assert not fit.converged
    assert math.isnan(fit.tau)


def test_too_few_counts():
    counts = np.zeros(N_CHANNELS)
    counts[30:40] = 5
    fit = fit_lifetime(counts, WIDTH, min_counts=100)
    assert not fit.converged
    assert fit.n_photons == 50
    with pytest.raises(DomainError):
        fit_lifetime(np.zeros((2, 3)), WIDTH)


TRUE_TAU = np.array([10.0, 15.0, 20.0, 25.0])


@pytest.fixture(scope="module")
def histograms():
    rng = np.random.default_rng(3)
    expected = np.stack([decay_curve(tau, 200.0, 0.2) for tau in TRUE_TAU])
    counts = rng.poisson(np.broadcast_to(expected, (2, 2, 4, N_CHANNELS)))
    # one empty voxel
    counts[1, 0, 2] = 0
    return PixelHistograms(counts, WIDTH, 128.0, pitch=10.0)


@pytest.fixture(scope="module")
def volume(histograms):
    return build_volume(histograms)


def test_build_volume(volume):
    assert volume.shape == (2, 2, 4)
    assert np.allclose(volume.z_centers, [16.0, 48.0, 80.0, 112.0])
    assert volume.mask[1, 0, 2] == INSUFFICIENT_COUNTS
    assert math.isnan(volume.tau[1, 0, 2])
    assert volume.valid.sum() == 15
    for j, tau in enumerate(TRUE_TAU):
        fitted = volume.tau[:, :, j][volume.valid[:, :, j]]
        assert np.allclose(fitted, tau, rtol=0.1)
    assert volume.fit_at(0, 0, 0).converged
    valid = volume.valid
    assert np.allclose(volume.rate_per_us[valid], 1e3 / volume.tau[valid])


def test_quarter_images(volume):
    closest = volume.quarter_images["closest"]
    distant = volume.quarter_images["distant"]
    assert closest.shape == distant.shape == (2, 2, 1)
    assert closest.z_centers[0] == 16.0
    assert distant.z_centers[0] == 112.0
    assert np.allclose(closest.tau, 10.0, rtol=0.1)
    assert np.allclose(distant.tau, 25.0, rtol=0.1)


def test_topography_correction_on_flat_sample_is_identity(volume):
    corrected = topography_correct(volume, np.zeros((2, 2)))
    assert corrected.absolute
    assert np.allclose(corrected.z_centers, volume.z_centers)
    assert np.array_equal(corrected.mask, volume.mask)
    assert np.allclose(corrected.tau, volume.tau, equal_nan=True)
    with pytest.raises(DomainError):
        topography_correct(corrected, np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        topography_correct(volume, np.zeros((3, 2)))


@pytest.mark.parametrize("keep_histograms", [True, False])
def test_topography_correction_shifts_raised_pixels(volume, keep_histograms):
    if not keep_histograms:
        volume = LifetimeVolume(volume.tau, volume.stderr, volume.mask,
                                volume.z_centers, pitch=volume.pitch)
    heightmap = np.array([[0.0, 32.0], [0.0, 32.0]])
    corrected = topography_correct(volume, heightmap)
    assert corrected.shape == (2, 2, 5)
    # flat column: same layers, nothing reaches the top one
    assert np.allclose(corrected.tau[0, 0, :4], volume.tau[0, 0])
    assert corrected.mask[0, 0, 4] == UNREACHED
    # raised column: one layer up, the lowest one lies inside the sample
    assert np.allclose(corrected.tau[0, 1, 1:], volume.tau[0, 1])
    assert corrected.mask[0, 1, 0] == BELOW_SURFACE
    assert math.isnan(corrected.tau[0, 1, 0])


def test_tip_offset_lifts_the_grid(volume):
    corrected = topography_correct(volume, np.zeros((2, 2)), tip_offset=32.0)
    assert corrected.shape == (2, 2, 5)
    assert corrected.mask[0, 0, 0] == UNREACHED
    assert np.allclose(corrected.tau[0, 0, 1:], volume.tau[0, 0])


def test_slices(volume):
    layer = height_slice(volume, 0.0, 64.0)
    assert layer.shape == (2, 2, 1)
    assert layer.z_centers[0] == pytest.approx(32.0)
    assert np.all((layer.tau[0, 0] > 9.0) & (layer.tau[0, 0] < 16.5))
    with pytest.raises(DomainError):
        height_slice(volume, 200.0, 300.0)

    section = xz_section(volume, 1)
    assert section.shape == (1, 2, 4)
    assert section.mask[0, 0, 2] == INSUFFICIENT_COUNTS
    with pytest.raises(DomainError):
        xz_section(volume, 2)

    assert rate_enhancement(20.0, 10.0) == pytest.approx(2.0)


def linear_rate_volume(shape=(3, 4, 5), pitch=10.0, dz=5.0):
    ny, nx, nz = shape
    y, x, z = np.meshgrid(np.arange(ny) * pitch, np.arange(nx) * pitch,
                          np.arange(nz) * dz, indexing="ij")
    rate = 10 + 0.5 * x + 0.2 * y + 0.1 * z
    mask = np.full(shape, VALID)
    return LifetimeVolume(1e3 / rate, np.zeros(shape), mask, np.arange(nz) * dz,
                          pitch=pitch)


def test_gradient_of_linear_rate_is_exact():
    volume = linear_rate_volume()
    volume.mask[1, 1, 1] = INSUFFICIENT_COUNTS
    volume = LifetimeVolume(volume.tau, volume.stderr, volume.mask,
                            volume.z_centers, pitch=volume.pitch)
    gradient = gradient_map(volume)
    defined = gradient.defined
    assert not defined[1, 1, 1]
    # next to the hole, an axis whose other side is the grid edge has no
    # valid neighbour at all
    starved = [(0, 1, 1, 1), (1, 0, 1, 0), (1, 1, 0, 2), (2, 1, 1, 1)]
    for iy, ix, iz, axis in starved:
        assert volume.valid[iy, ix, iz]
        assert not defined[iy, ix, iz]
        assert math.isnan(gradient.grad[iy, ix, iz, axis])
    assert defined.sum() == volume.valid.sum() - len(starved) == 55
    assert np.allclose(gradient.grad[defined], [0.5, 0.2, 0.1])
    assert np.allclose(gradient.magnitude[defined], math.sqrt(0.25 + 0.04 + 0.01))
    assert np.allclose(gradient.direction[0, 0, 0],
                       np.array([0.5, 0.2, 0.1]) / math.sqrt(0.3))


def test_gradient_without_valid_neighbours():
    volume = linear_rate_volume((1, 3, 1))
    mask = np.array([[[INSUFFICIENT_COUNTS], [VALID], [INSUFFICIENT_COUNTS]]])
    volume = LifetimeVolume(volume.tau, volume.stderr, mask, volume.z_centers,
                            pitch=volume.pitch)
    gradient = gradient_map(volume)
    assert not gradient.defined.any()


def test_gradient_single_sample_axes_are_zero():
    gradient = gradient_map(linear_rate_volume((1, 4, 1)))
    assert gradient.defined.all()
    assert np.allclose(gradient.grad[..., 0], 0.5)
    assert np.allclose(gradient.grad[..., 1:], 0.0)


def wire_volume(nx=40, nz=30, pitch=5.0, dz=5.0, sign=1.0):
    # rate falls off with the distance from a wire axis at (100, 50)
    wire = Cylinder(100.0, 0.0, 50.0)
    y, x, z = np.meshgrid([0.0], np.arange(nx) * pitch,
                          (np.arange(nz) + 0.5) * dz, indexing="ij")
    rate = 100.0 - sign * 0.1 * np.hypot(x - wire.x0, z - wire.radius)
    mask = np.full(rate.shape, VALID)
    volume = LifetimeVolume(1e3 / rate, np.zeros(rate.shape), mask,
                            (np.arange(nz) + 0.5) * dz, pitch=pitch, absolute=True)
    return volume, wire


def test_inward_fraction_of_radial_rate():
    volume, wire = wire_volume()
    fraction, n_near = inward_fraction(gradient_map(volume), wire, reach=10.0)
    assert n_near > 10
    assert fraction == 1.0

    volume, wire = wire_volume(sign=-1.0)
    fraction, _ = inward_fraction(gradient_map(volume), wire, reach=10.0)
    assert fraction == 0.0

    # shifted far past the wire nothing is counted
    _, n_shifted = inward_fraction(gradient_map(volume), wire, reach=10.0,
                                   x_shift=500.0)
    assert n_shifted == 0
    assert math.isnan(inward_fraction(gradient_map(volume), wire, reach=10.0,
                                      x_shift=500.0)[0])


def test_stripe_contrast():
    tau = np.full((2, 5, 1), 20.0)
    tau[:, 3] = 25.0
    image = LifetimeVolume(tau, np.zeros(tau.shape), np.full(tau.shape, VALID),
                           [10.0], pitch=5.0)
    assert stripe_contrast(image) == pytest.approx(0.25)
    # a dark column is not a stripe
    tau[:, 3] = 15.0
    assert stripe_contrast(image) == 0.0


WIRE_EMITTER = EmitterModel(orientation=math.radians(30.7),
                            radiative_rate_free=36.9, nonradiative_rate=9.0)


@pytest.fixture(scope="module")
def wire_scan():
    scene = Scene("glass", [Cylinder(120.0, 0.0, 50.0, material="silver")],
                  MaterialTable({"silver": -20 + 1j}))
    plan = ScanPlan(nx=48, ny=1, pitch=5.0, probe_offset=(30.0, 0.0),
                    tip_offset=5.0)
    truth = ground_truth_volume(scene, plan, WIRE_EMITTER, 25)
    corrected = topography_correct(truth, truth.heightmap,
                                   tip_offset=plan.tip_offset)
    return scene.objects[0], plan, truth, corrected


def test_corrected_wire_gradient_points_at_the_wire(wire_scan):
    wire, plan, _, corrected = wire_scan
    reach = 2 * max(corrected.pitch, corrected.bin_width)
    fraction, n_near = inward_fraction(
        gradient_map(corrected), wire, reach=reach,
        x_shift=plan.origin[0] + plan.probe_offset[0])
    assert n_near >= 20
    assert fraction >= 0.9


def test_topography_correction_removes_the_offset_stripe(wire_scan):
    wire, _, truth, corrected = wire_scan
    closest = truth.subvolume(layers=slice(0, 1))
    z_top = 2 * wire.radius
    band = height_slice(corrected, z_top + 10, z_top + 40)
    before = stripe_contrast(closest)
    after = stripe_contrast(band)
    assert before > 0
    assert after * 5 <= before


def test_flat_glass_closure():
    plan = ScanPlan(nx=1, ny=1, dwell=50.0, excitation_prob=0.5,
                    marker_divisor=4, seed=1)
    field = GroundTruthField(Scene(), WIRE_EMITTER)
    stream = simulate_scan(Scene(), plan, WIRE_EMITTER, field=field)
    volume = build_volume(bin_photons(stream, 25), quarters=False)
    truth = ground_truth_volume(Scene(), plan, WIRE_EMITTER, 25, field=field)
    bright = volume.valid & (volume.n_photons >= 10**4)
    assert bright.sum() >= 5
    error = np.abs(volume.tau - truth.tau) / truth.tau
    assert np.all(error[bright] < 0.05)


def hbt_stream(photons):
    header = hbt_header()
    times = np.array([t for t, _ in photons])
    macro, frac = np.divmod(times, header.macro_resolution)
    micro = np.round(frac * 1e3 / header.micro_resolution)
    table = TagTable(np.full(len(photons), TagKind.PHOTON),
                     [ch for _, ch in photons], macro, micro)
    return TagStream(header, table)


def test_g2_correlate_counts_pairs():
    stream = hbt_stream([(100.0, 0), (103.0, 1), (500.0, 1), (1000.0, 0)])
    hist = g2_correlate(stream, window_ns=10.0, bin_ns=2.0)
    assert len(hist.lags_ns) == 10
    assert hist.counts.sum() == 1
    assert hist.counts[6] == 1
    assert hist.lags_ns[6] == pytest.approx(3.0)
    # 2 x 2 photons over 900 ns in 2 ns bins
    assert np.allclose(hist.expected, 4 * 2.0 / 900.0)


def test_g2_channel_errors():
    with pytest.raises(ChannelError):
        g2_correlate(hbt_stream([(100.0, 0), (200.0, 0)]))
    empty = TagStream(hbt_header(), TagTable.empty())
    hist = g2_correlate(empty, window_ns=10.0, bin_ns=2.0)
    assert hist.counts.sum() == 0


def test_g2_fit_of_noiseless_histogram():
    lags = np.arange(-199.5, 200.0, 1.0)
    expected = np.full(len(lags), 10000.0)
    counts = np.round(expected * g2_model(lags, 0.7, 0.5, 10.0, 100.0))
    hist = LagHistogram(lags, counts.astype(np.int64), expected, counts / expected, 1.0)
    result = g2_fit(hist)
    assert result.converged
    assert result.g2_zero == pytest.approx(0.3, abs=0.01)
    assert result.params["antibunching_time"] == pytest.approx(10.0, rel=0.05)
    assert result.params["bunching_time"] == pytest.approx(100.0, rel=0.1)
    assert result.is_single_emitter

    poisson = LagHistogram(lags, expected.astype(np.int64), expected,
                           np.ones(len(lags)), 1.0)
    flat = g2_fit(poisson)
    assert not flat.converged or not flat.is_single_emitter
