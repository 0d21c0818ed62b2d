import math

import numpy as np
import pytest
from scipy.linalg import expm

from qeflim.exceptions import DomainError, EmptyScanError, ModelError
from qeflim.ldos import EmitterModel
from qeflim.reconstruct import g2_correlate, g2_fit
from qeflim.simulation import (BackgroundModel, Cylinder, GroundTruthField,
                               MaterialTable, ScanPlan, Scene, Sphere,
                               ThreeLevelModel, background_for_g2_zero,
                               ground_truth_volume, local_decay_rate,
                               plan_heightmap, simulate_hbt, simulate_scan,
                               three_level_rates)
from qeflim.tagstream import TagKind, absolute_times_ns

EMITTER = EmitterModel(orientation=math.radians(30.7),
                       radiative_rate_free=36.9, nonradiative_rate=9.0)
MATERIALS = MaterialTable({"silver": -20 + 1j})


def wire_scene():
    return Scene("glass", [Cylinder(0.0, 0.0, 50.0, material="silver")], MATERIALS)


def test_topography():
    scene = Scene("glass", [Cylinder(0.0, 0.0, 50.0, material="silver"),
                            Sphere(300.0, 0.0, 20.0, material="silver")],
                  MATERIALS)
    assert scene.topography(0.0, 123.0) == pytest.approx(100.0)
    assert scene.topography(30.0, 0.0) == pytest.approx(90.0)
    assert scene.topography(300.0, 0.0) == pytest.approx(40.0)
    assert scene.topography(150.0, 0.0) == 0.0
    heights = scene.topography(np.array([0.0, 150.0]), np.zeros(2))
    assert heights.shape == (2,)


def test_nearest_surface():
    scene = wire_scene()
    distance, material = scene.nearest_surface((0.0, 0.0, 150.0))
    assert material == "silver"
    assert distance == pytest.approx(50.0)
    distance, material = scene.nearest_surface((200.0, 0.0, 30.0))
    assert material == "glass"
    assert distance == pytest.approx(30.0)
    with pytest.raises(DomainError):
        scene.nearest_surface((0.0, 0.0, 50.0))


def test_unknown_material():
    with pytest.raises(DomainError):
        Scene("glass", [Sphere(0.0, 0.0, 10.0, material="unobtainium")])
    with pytest.raises(DomainError):
        Cylinder(0.0, 0.0, -1.0)


def test_dispersive_material_interpolates():
    materials = MaterialTable({"metal": [(600.0, -10 + 1j), (800.0, -30 + 2j)]})
    assert materials.medium("metal", 700.0).eps == pytest.approx(-20 + 1.5j)
    # clamped beyond the table
    assert materials.medium("metal", 900.0).eps == pytest.approx(-30 + 2j)
    assert callable(materials.resolve("metal"))
    assert materials.resolve("glass").eps == 2.25


def test_metal_enhances_the_local_rate():
    scene = wire_scene()
    over_wire = local_decay_rate(scene, EMITTER, (0.0, 0.0, 110.0))
    over_glass = local_decay_rate(scene, EMITTER, (500.0, 0.0, 10.0))
    assert over_wire > over_glass
    # far from everything the rate tends to the free rate
    far = local_decay_rate(scene, EMITTER, (500.0, 0.0, 6000.0))
    assert far == pytest.approx(45.9, rel=0.05)


def test_field_matches_direct_evaluation():
    scene = wire_scene()
    field = GroundTruthField(scene, EMITTER)
    for point in [(0.0, 0.0, 150.0), (500.0, 0.0, 50.0), (40.0, 0.0, 200.0)]:
        assert field.rate(*point) == pytest.approx(
            local_decay_rate(scene, EMITTER, point), rel=1e-2)
    profile = field.rate_profile(500.0, 0.0, [20.0, 80.0])
    assert profile.shape == (2,)
    assert np.allclose(field.lifetime(500.0, 0.0, 20.0), 1e3 / profile[0])


def test_single_dipole_model_is_threaded_through_the_field():
    scene = wire_scene()
    point = (500.0, 0.0, 6000.0)
    single = GroundTruthField(scene, EMITTER, model="single")
    direct = local_decay_rate(scene, EMITTER, point, model="single")
    assert single.rate(*point) == pytest.approx(direct, rel=1e-2)
    # one dipole radiates with cos + sin of its elevation in the far field
    weight = math.cos(EMITTER.orientation) + math.sin(EMITTER.orientation)
    assert direct == pytest.approx(9.0 + 36.9 * weight, rel=0.05)
    assert single.rate(*point) > GroundTruthField(scene, EMITTER).rate(*point)
    with pytest.raises(ValueError):
        GroundTruthField(scene, EMITTER, model="triple")


@pytest.fixture(scope="module")
def glass_field():
    return GroundTruthField(Scene(), EMITTER)


def small_plan(**kwargs):
    kwargs.setdefault("nx", 2)
    kwargs.setdefault("ny", 2)
    kwargs.setdefault("dwell", 0.2)
    kwargs.setdefault("excitation_prob", 0.05)
    kwargs.setdefault("marker_divisor", 4)
    kwargs.setdefault("seed", 3)
    return ScanPlan(**kwargs)


def test_scan_is_deterministic(glass_field):
    plan = small_plan()
    first = simulate_scan(Scene(), plan, EMITTER, field=glass_field)
    again = simulate_scan(Scene(), plan, EMITTER, field=glass_field)
    assert first.header == again.header
    assert first.records == again.records

    other = simulate_scan(Scene(), small_plan(seed=4), EMITTER, field=glass_field)
    assert not other.records == first.records


def test_scan_does_not_depend_on_threads(glass_field):
    plan = small_plan()
    serial = simulate_scan(Scene(), plan, EMITTER, field=glass_field, threads=1)
    parallel = simulate_scan(Scene(), plan, EMITTER, field=glass_field, threads=2)
    assert serial.records == parallel.records


def test_scan_markers_and_photons(glass_field):
    plan = small_plan()
    header, records = simulate_scan(Scene(), plan, EMITTER, field=glass_field)
    assert header.scan_dims == (2, 2)

    pixels = records.pixel_markers
    assert list(pixels.pixel_index) == [0, 1, 2, 3]
    assert list(pixels.macro_time) == [0, 2000, 4000, 6000]

    cantilever = absolute_times_ns(records.cantilever_markers, header)
    spacing = plan.marker_divisor * 1e9 / plan.cantilever_freq
    assert cantilever[0] == 0.0
    assert np.allclose(np.diff(cantilever), spacing, atol=0.3)
    assert cantilever[-1] > 4 * 2000 * 100.0

    # 2000 pulses per pixel at 5% detection
    n_photons = len(records.photons)
    assert 300 < n_photons < 500
    assert np.all(np.diff(records.macro_time) >= 0)
    assert np.all(records.photons.micro_time < header.n_micro_channels)


def test_background_adds_counts(glass_field):
    plain = simulate_scan(Scene(), small_plan(), EMITTER, field=glass_field)
    noisy_plan = small_plan(background=BackgroundModel(flat_rate=1e6))
    noisy = simulate_scan(Scene(), noisy_plan, EMITTER, field=glass_field)
    # 200 flat counts per pixel on top of the signal
    assert len(noisy.records.photons) - len(plain.records.photons) > 500


def test_empty_scan():
    with pytest.raises(EmptyScanError):
        simulate_scan(Scene(), ScanPlan(nx=0, ny=3), EMITTER)
    with pytest.raises(DomainError):
        ScanPlan(nx=2, ny=2, excitation_prob=1.5)


def test_ground_truth_volume(glass_field):
    plan = small_plan()
    truth = ground_truth_volume(Scene(), plan, EMITTER, 8, field=glass_field)
    assert truth.shape == (2, 2, 8)
    assert truth.valid.all()
    assert np.allclose(truth.heightmap, 0.0)
    assert np.allclose(truth.z_centers, (np.arange(8) + 0.5) * 16.0)
    # laterally uniform over a bare substrate
    assert np.allclose(truth.tau, truth.tau[:1, :1])
    assert np.all((truth.tau > 10) & (truth.tau < 40))


def test_heightmap_over_a_wire():
    plan = ScanPlan(nx=5, ny=1, pitch=25.0, origin=(-50.0, 0.0))
    heightmap = plan_heightmap(wire_scene(), plan)
    assert heightmap.shape == (1, 5)
    assert heightmap[0, 2] == pytest.approx(100.0)
    assert heightmap[0, 0] == 0.0


def generator_matrix(rates):
    r, g, k, b = rates
    # states: ground, excited, shelf
    return np.array([[-r, g, b],
                     [r, -(g + k), 0.0],
                     [0.0, k, -b]])


@pytest.mark.parametrize("model", [
    ThreeLevelModel(0.0, 10.0),
    ThreeLevelModel(0.5, 10.0, 100.0),
    ThreeLevelModel(3.0, 5.0, 400.0),
])
def test_three_level_rates_reproduce_g2(model):
    rates = three_level_rates(model)
    assert all(value >= 0 for value in rates)
    matrix = generator_matrix(rates)
    start = np.array([1.0, 0.0, 0.0])
    for lag in [0.0, 2.0, 10.0, 50.0, 300.0]:
        excited = (expm(matrix * lag) @ start)[1]
        assert excited / rates.excited_population == pytest.approx(
            float(model.g2(lag)), rel=1e-6, abs=1e-9)


def test_three_level_model_validation():
    with pytest.raises(ModelError):
        ThreeLevelModel(-0.1)
    with pytest.raises(ModelError):
        ThreeLevelModel(0.5, 100.0, 10.0)
    assert ThreeLevelModel(0.5, 10.0, 100.0).g2_zero == 0.0


def test_background_for_g2_zero():
    assert background_for_g2_zero(0.0) == 0.0
    assert background_for_g2_zero(0.75) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        background_for_g2_zero(1.0)


def test_hbt_stream_is_reproducible():
    model = ThreeLevelModel(0.5, 10.0, 100.0)
    first = simulate_hbt(model, 1e5, 0.01, seed=7)
    again = simulate_hbt(model, 1e5, 0.01, seed=7)
    assert first.records == again.records
    photons = first.records
    assert np.all(photons.kind == TagKind.PHOTON)
    n0 = int(np.sum(photons.channel == 0))
    n1 = int(np.sum(photons.channel == 1))
    # 1000 counts expected, split 50/50
    assert 800 < n0 + n1 < 1200
    assert abs(n0 - n1) < 200


def test_hbt_rate_above_the_emitter_limit():
    with pytest.raises(ModelError):
        simulate_hbt(ThreeLevelModel(0.0, 10.0), 1e8, 0.01)
    with pytest.raises(DomainError):
        simulate_hbt(ThreeLevelModel(), 1e5, 0.01, background_fraction=1.0)


def test_poisson_source_is_flat():
    stream = simulate_hbt(ThreeLevelModel(), 2e5, 10.0, seed=1, poisson=True)
    hist = g2_correlate(stream, window_ns=500.0, bin_ns=5.0)
    assert 0.98 <= float(np.mean(hist.g2)) <= 1.02
    assert 0.9 <= float(np.mean(hist.g2[95:105])) <= 1.1


def test_three_level_antibunching_is_recovered():
    model = ThreeLevelModel(0.5, 10.0, 100.0)
    stream = simulate_hbt(model, 2e5, 30.0, seed=2,
                          background_fraction=background_for_g2_zero(0.3))
    hist = g2_correlate(stream, window_ns=300.0, bin_ns=2.0)
    result = g2_fit(hist)
    assert result.converged
    assert result.g2_zero == pytest.approx(0.3, abs=0.05)
    assert result.is_single_emitter
    assert result.params["antibunching_time"] == pytest.approx(10.0, rel=0.2)
