import math

import numpy as np
import pytest

from qeflim.calibrate import (average_approach_curves, fit_approach_curve,
                              synthetic_curve)
from qeflim.exceptions import DomainError, IdentifiabilityError, ShapeError
from qeflim.ldos import GLASS, EmitterModel, SpectrumModel
from qeflim.utils import ApproachCurve

EMITTER = EmitterModel(orientation=math.radians(30.7),
                       radiative_rate_free=36.9, nonradiative_rate=9.0)


def test_noiseless_curve_is_recovered():
    heights = np.linspace(10.0, 700.0, 40)
    curve = synthetic_curve(heights, GLASS, EMITTER)
    result = fit_approach_curve(curve, GLASS, spectrum=SpectrumModel())
    assert result.k_nr == pytest.approx(9.0, rel=1e-3)
    assert result.k_r0 == pytest.approx(36.9, rel=1e-3)
    assert result.phi == pytest.approx(math.radians(30.7), abs=1e-3)
    assert result.qe == pytest.approx(36.9 / 45.9, rel=1e-3)
    assert result.residual < 1e-6
    assert result.n_samples == 40


def test_noisy_dense_curve():
    heights = np.linspace(10.0, 1400.0, 140)
    curve = synthetic_curve(heights, GLASS, EMITTER, noise=0.002, seed=4,
                            spectral=False)
    assert curve.stderr is not None
    result = fit_approach_curve(curve, GLASS, wavelength=700.0)
    assert result.k_nr == pytest.approx(9.0, rel=0.1)
    assert result.k_r0 == pytest.approx(36.9, rel=0.1)
    assert math.degrees(result.phi) == pytest.approx(30.7, rel=0.1)
    assert result.qe == pytest.approx(0.804, abs=0.05)
    assert np.all(np.isfinite(result.stderr))
    # chi-square of a correct model is about the degrees of freedom
    assert 85 < result.residual < 195

    report = result.as_dict()
    assert report["model"] == "nv"
    assert report["phi_deg"] == pytest.approx(math.degrees(result.phi))


def test_averaging_repeated_curves():
    heights = np.linspace(10.0, 700.0, 30)
    curves = [synthetic_curve(heights, GLASS, EMITTER, noise=0.02, seed=seed,
                              spectral=False) for seed in range(16)]
    mean = average_approach_curves(curves)
    assert np.allclose(mean.rates, np.mean([c.rates for c in curves], axis=0))
    assert np.allclose(mean.stderr, curves[0].stderr / 4)

    bare = [ApproachCurve(heights, c.rates) for c in curves]
    spread = average_approach_curves(bare)
    assert spread.stderr is not None
    assert np.all(spread.stderr > 0)
    assert average_approach_curves(bare[:1]).stderr is None
    with pytest.raises(ShapeError):
        average_approach_curves([curves[0], synthetic_curve(heights[:-1], GLASS,
                                                            EMITTER, spectral=False)])
    with pytest.raises(ShapeError):
        average_approach_curves([])


def test_starts_and_threads_do_not_change_the_answer():
    heights = np.linspace(10.0, 700.0, 30)
    curve = synthetic_curve(heights, GLASS, EMITTER, spectral=False)
    serial = fit_approach_curve(curve, GLASS)
    threaded = fit_approach_curve(curve, GLASS, threads=2)
    seeded = fit_approach_curve(curve, GLASS, init=(9.0, 36.9, 0.5))
    for other in (threaded, seeded):
        assert other.phi == pytest.approx(serial.phi, abs=1e-4)
        assert other.k_r0 == pytest.approx(serial.k_r0, rel=1e-4)


def test_single_dipole_model():
    heights = np.linspace(10.0, 700.0, 30)
    curve = synthetic_curve(heights, GLASS, EMITTER, spectral=False, model="single")
    result = fit_approach_curve(curve, GLASS, model="single")
    assert result.phi == pytest.approx(math.radians(30.7), abs=1e-3)
    assert result.model == "single"


def test_identifiability():
    with pytest.raises(IdentifiabilityError):
        fit_approach_curve(ApproachCurve([10.0, 300.0, 600.0], [50.0, 45.0, 46.0]),
                           GLASS)
    narrow = ApproachCurve(np.linspace(10.0, 110.0, 20), np.linspace(60.0, 48.0, 20))
    with pytest.raises(IdentifiabilityError):
        fit_approach_curve(narrow, GLASS)


def test_curve_validation():
    with pytest.raises(DomainError):
        ApproachCurve([10.0, 5.0], [1.0, 1.0])
    with pytest.raises(DomainError):
        ApproachCurve([10.0, 20.0], [1.0, -1.0])
    with pytest.raises(ShapeError):
        ApproachCurve([10.0, 20.0], [1.0])
    curve = ApproachCurve([10.0, 20.0], [1.0, 2.0], [np.nan, np.nan])
    assert curve.stderr is None
    assert np.array_equal(curve.weights, [1.0, 1.0])
