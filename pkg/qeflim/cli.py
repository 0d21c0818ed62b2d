"""
Command-line entry point.

Exit codes: 0 success, 1 usage, 2 bad input, 3 numerical failure.
"""

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .calibrate import fit_approach_curve
from .exceptions import InputError, QEFLIMError, UsageError
from .ldos import SpectrumModel, approach_curve, lifetime_ns
from .reconstruct import (bin_photons, build_volume, g2_correlate, g2_fit,
                          gradient_map, topography_correct)
from .simulation import (BackgroundModel, Cylinder, MaterialTable, ScanPlan,
                         Scene, Sphere, ThreeLevelModel,
                         background_for_g2_zero, ground_truth_volume,
                         plan_heightmap, simulate_hbt, simulate_scan)
from .simulation.scene import GroundTruthField
from .tagstream import read_stream, write_stream
from .utils import (RunConfig, load_heightmap, read_approach_curve,
                    summarize, summarize_calibration, summarize_g2,
                    write_g2, write_gradient, write_heightmap, write_pgm,
                    write_report, write_volume)


class _ArgumentParser(argparse.ArgumentParser):
    # usage errors share exit code 1 with UsageError
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(UsageError.exit_code, "{}: error: {}\n".format(self.prog, message))


def scene_from_config(config):
    materials = MaterialTable(config.materials)
    objects = []
    for section in config.named_sections("cylinder"):
        c = config.section(section)
        objects.append(Cylinder(c["x0"], c["y0"], c["radius"],
                                math.radians(c["angle_deg"]), c["material"]))
    for section in config.named_sections("sphere"):
        s = config.section(section)
        objects.append(Sphere(s["cx"], s["cy"], s["radius"], s["material"]))
    return Scene(config.get("scene", "substrate"), objects, materials,
                 config.medium())


def plan_from_config(config, seed=None):
    s = config.section("scan")
    background = BackgroundModel(fast_fraction=s["bg_fast_fraction"],
                                 fast_lifetime=s["bg_fast_lifetime"],
                                 flat_rate=s["bg_flat_rate"])
    return ScanPlan(nx=s["nx"], ny=s["ny"], pitch=s["pitch"], dwell=s["dwell_ms"],
                    amplitude=s["amplitude"],
                    cantilever_freq=s["cantilever_freq"],
                    sync_rate=s["sync_rate"],
                    excitation_prob=s["excitation_prob"],
                    detection_efficiency=s["detection_efficiency"],
                    background=background,
                    seed=s["seed"] if seed is None else seed,
                    marker_divisor=s["marker_divisor"],
                    micro_resolution=s["micro_resolution"],
                    tip_offset=s["tip_offset"],
                    probe_offset=(s["probe_offset_x"], s["probe_offset_y"]))


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    config = RunConfig.from_file(args.config)
    scene = scene_from_config(config)
    plan = plan_from_config(config, seed=args.seed)
    emitter = config.emitter()
    q = config.quadrature()
    spectral = config.get("emitter", "spectral")
    n_bins = config.get("reconstruct", "n_bins")
    out = _out_dir(args.out)

    field = GroundTruthField(scene, emitter, spectral=spectral, q=q,
                             model=config.get("emitter", "model"),
                             weighting=config.get("emitter", "weighting"),
                             verbose=args.verbose)
    stream = simulate_scan(scene, plan, emitter, field=field, q=q,
                           threads=args.threads, verbose=args.verbose)
    write_stream(out / "stream.qef", *stream)
    write_heightmap(out / "heightmap.csv", plan_heightmap(scene, plan))
    truth = ground_truth_volume(scene, plan, emitter, n_bins, field=field, q=q)
    write_volume(out / "ground_truth.csv", truth)
    print("wrote", len(stream.records), "records to", out / "stream.qef")
    return 0


def cmd_simulate_hbt(args):
    config = RunConfig.from_file(args.config)
    h = config.section("hbt")
    model = ThreeLevelModel(h["bunching_amplitude"], h["antibunching_time"],
                            h["bunching_time"])
    background_fraction = h["background_fraction"]
    if h["g2_zero"] is not None:
        background_fraction = background_for_g2_zero(h["g2_zero"])
    seed = h["seed"] if args.seed is None else args.seed
    stream = simulate_hbt(model, h["mean_rate"], h["duration"], seed=seed,
                          background_fraction=background_fraction,
                          poisson=h["poisson"], verbose=args.verbose)
    out = _out_dir(args.out)
    write_stream(out / "hbt.qef", *stream)
    print("wrote", len(stream.records), "records to", out / "hbt.qef")
    return 0


def _read_stream(path, verbose):
    try:
        return read_stream(path, verbose=verbose)
    except OSError as exc:
        raise InputError("cannot read stream {}: {}".format(path, exc.strerror))


def _write_image(out, name, image):
    write_volume(out / "{}.csv".format(name), image)
    write_pgm(out / "{}.pgm".format(name), image.tau[:, :, 0])


def cmd_reconstruct(args):
    stream = _read_stream(args.stream, args.verbose)
    out = _out_dir(args.out)
    histograms = bin_photons(stream, args.bins, verbose=args.verbose)
    volume = build_volume(histograms, cutoff_ns=args.cutoff_ns,
                          min_counts=args.min_counts, quarters=args.quarters,
                          threads=args.threads, verbose=args.verbose)
    write_volume(out / "volume_relative.csv", volume)
    for name, image in volume.quarter_images.items():
        _write_image(out, "quarter_{}".format(name), image)

    if args.heightmap is not None:
        try:
            heightmap = load_heightmap(args.heightmap)
        except OSError as exc:
            raise InputError("cannot read heightmap {}: {}".format(
                args.heightmap, exc.strerror))
        volume = topography_correct(volume, heightmap, tip_offset=args.tip_offset,
                                    cutoff_ns=args.cutoff_ns,
                                    min_counts=args.min_counts,
                                    verbose=args.verbose)
        write_volume(out / "volume.csv", volume)
    if args.gradient:
        write_gradient(out / "gradient.csv", gradient_map(volume))

    summarize(volume)
    valid = volume.valid
    fraction = valid.mean() if valid.size else 0.0
    median = float(np.median(volume.tau[valid])) if valid.any() else float("nan")
    print("valid voxel fraction {:.3f}, median tau {:.3f} ns".format(fraction, median))
    return 0


def cmd_g2(args):
    stream = _read_stream(args.stream, args.verbose)
    hist = g2_correlate(stream, window_ns=args.window_ns, bin_ns=args.bin_ns)
    result = g2_fit(hist)
    out = _out_dir(args.out)
    write_g2(out / "g2.csv", hist)
    report = {name: float(value) for name, value in result.params.items()}
    report["converged"] = result.converged
    report["single_emitter"] = result.is_single_emitter
    write_report(out / "g2_report.ini", {"g2": report})
    summarize_g2(result)
    return 0


def _calibration_setup(config):
    materials = MaterialTable(config.materials)
    substrate = materials.resolve(config.get("calibration", "substrate"))
    emitter_section = config.section("emitter")
    spectrum = None
    if config.get("calibration", "spectral"):
        spectrum = SpectrumModel(center=emitter_section["spectrum_center"],
                                 std_dev=emitter_section["spectrum_std"],
                                 n_samples=emitter_section["spectrum_samples"])
    return substrate, spectrum, emitter_section


def cmd_fit_approach(args):
    if args.config is None:
        config = RunConfig.from_string("")
    else:
        config = RunConfig.from_file(args.config)
    try:
        curve = read_approach_curve(args.curve)
    except OSError as exc:
        raise InputError("cannot read approach curve {}: {}".format(
            args.curve, exc.strerror))
    substrate, spectrum, e = _calibration_setup(config)
    result = fit_approach_curve(
        curve, substrate, medium_emitter=config.medium(),
        wavelength=config.get("calibration", "wavelength"), spectrum=spectrum,
        q=config.quadrature(), model=e["model"], weighting=e["weighting"],
        threads=args.threads, verbose=args.verbose)
    out = _out_dir(args.out)
    write_report(out / "calibration.ini", {"calibration": result.as_dict()})
    summarize_calibration(result)
    return 0


def cmd_approach_curve(args):
    config = RunConfig.from_file(args.config)
    substrate, spectrum, e = _calibration_setup(config)
    emitter = config.emitter()
    heights = np.linspace(args.z_min, args.z_max, args.n)
    rates = approach_curve(heights, substrate, emitter,
                           medium_emitter=config.medium(),
                           wavelength=config.get("calibration", "wavelength"),
                           spectral=spectrum is not None, q=config.quadrature(),
                           model=e["model"], weighting=e["weighting"],
                           verbose=args.verbose)
    out = _out_dir(args.out)
    pd.DataFrame({"height_nm": heights, "rate_per_us": rates,
                  "tau_ns": lifetime_ns(rates)}).to_csv(out / "approach_curve.csv",
                                                 index=False)
    return 0


def build_parser():
    parser = _ArgumentParser(prog="qeflim",
                             description="Quantum-emitter fluorescence lifetime imaging")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-v", "--verbose", action="store_true")
        p.add_argument("--out", default=".", help="output directory")
        p.set_defaults(func=func)
        return p

    threads = os.cpu_count() or 1

    p = add("simulate", cmd_simulate, "simulate a scan over a scene")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=threads)

    p = add("simulate-hbt", cmd_simulate_hbt, "simulate a two-detector stream")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)

    p = add("reconstruct", cmd_reconstruct, "lifetime volume from a stream")
    p.add_argument("stream")
    p.add_argument("heightmap", nargs="?", default=None)
    p.add_argument("--bins", type=int, default=25)
    p.add_argument("--cutoff-ns", type=float, default=5.0)
    p.add_argument("--min-counts", type=int, default=100)
    p.add_argument("--tip-offset", type=float, default=0.0,
                   help="apex-sample distance at the lowest point, nm")
    p.add_argument("--quarters", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--gradient", action="store_true")
    p.add_argument("--threads", type=int, default=threads)

    p = add("g2", cmd_g2, "photon correlation of a two-detector stream")
    p.add_argument("stream")
    p.add_argument("--window-ns", type=float, default=200.0)
    p.add_argument("--bin-ns", type=float, default=1.0)

    p = add("fit-approach", cmd_fit_approach, "QE and orientation from an approach curve")
    p.add_argument("curve")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--threads", type=int, default=1)

    p = add("approach-curve", cmd_approach_curve, "forward-model approach curve")
    p.add_argument("config")
    p.add_argument("--z-min", type=float, default=1.0)
    p.add_argument("--z-max", type=float, default=700.0)
    p.add_argument("--n", type=int, default=141)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QEFLIMError as exc:
        print("error:", exc, file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
