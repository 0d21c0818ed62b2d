"""
INI run configuration. Every key is checked against a typed schema and
unknown sections or keys are rejected with the line they appear on.

Example::

    [scene]
    substrate = glass

    [materials]
    silver = 650:-17.5+0.6j, 700:-20.4+0.7j, 750:-23.6+0.8j

    [cylinder.wire]
    x0 = 160
    radius = 50
    material = silver

    [scan]
    nx = 32
    ny = 32
    probe_offset_x = 30
"""

import configparser
import math
import re

import numpy as np

from ..exceptions import ConfigError
from ..ldos import EmitterModel, Medium, QuadratureConfig, SpectrumModel


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "yes", "true", "on"):
        return True
    if lowered in ("0", "no", "false", "off"):
        return False
    raise ValueError("not a boolean: {!r}".format(text))


def _parse_complex(text):
    return complex(text.replace(" ", "").replace("i", "j"))


def _parse_material(text):
    """A complex permittivity, or 'wavelength:eps, ...' table rows."""
    if ":" not in text:
        return _parse_complex(text)
    rows = []
    for item in text.split(","):
        wavelength, eps = item.split(":")
        rows.append((float(wavelength), _parse_complex(eps)))
    return np.array(rows, dtype=complex)


_PARSERS = {
    float: float,
    int: int,
    bool: _parse_bool,
    str: str.strip,
    complex: _parse_complex,
    "material": _parse_material,
}


def _parse(kind, text):
    # a tuple kind lists the allowed words
    if isinstance(kind, tuple):
        word = text.strip().lower()
        if word not in kind:
            raise ValueError("expected one of {}, got {!r}".format(
                ", ".join(kind), word))
        return word
    return _PARSERS[kind](text)


SCHEMA = {
    "scene": {
        "substrate": (str, "glass"),
        "medium_eps": (complex, 1.0),
    },
    "cylinder": {
        "x0": (float, 0.0),
        "y0": (float, 0.0),
        "radius": (float, 50.0),
        "angle_deg": (float, 90.0),
        "material": (str, "silver"),
    },
    "sphere": {
        "cx": (float, 0.0),
        "cy": (float, 0.0),
        "radius": (float, 50.0),
        "material": (str, "gold"),
    },
    "emitter": {
        "orientation_deg": (float, 30.7),
        "k_r0": (float, 36.9),
        "k_nr": (float, 9.0),
        "spectral": (bool, False),
        "spectrum_center": (float, 700.0),
        "spectrum_std": (float, 50.0),
        "spectrum_samples": (int, 21),
        "model": (("nv", "single"), "nv"),
        "weighting": (("linear", "squared"), "linear"),
    },
    "scan": {
        "nx": (int, 16),
        "ny": (int, 16),
        "pitch": (float, 20.0),
        "dwell_ms": (float, 1.0),
        "amplitude": (float, 128.0),
        "cantilever_freq": (float, 70e3),
        "sync_rate": (float, 10e6),
        "excitation_prob": (float, 0.01),
        "detection_efficiency": (float, 1.0),
        "seed": (int, 0),
        "marker_divisor": (int, 4096),
        "micro_resolution": (float, 256.0),
        "tip_offset": (float, 5.0),
        "probe_offset_x": (float, 0.0),
        "probe_offset_y": (float, 0.0),
        "bg_fast_fraction": (float, 0.0),
        "bg_fast_lifetime": (float, 0.3),
        "bg_flat_rate": (float, 0.0),
    },
    "quadrature": {
        "rel_tolerance": (float, 1e-9),
        "s_max": (float, 1e6),
        "min_height": (float, 1.0),
        "envelope": (float, 1e-12),
        "limit": (int, 500),
    },
    "reconstruct": {
        "n_bins": (int, 25),
        "cutoff_ns": (float, 5.0),
        "min_counts": (int, 100),
        "quarters": (bool, True),
    },
    "calibration": {
        "substrate": (str, "glass"),
        "wavelength": (float, 700.0),
        "spectral": (bool, True),
    },
    "hbt": {
        "bunching_amplitude": (float, 0.5),
        "antibunching_time": (float, 10.0),
        "bunching_time": (float, 100.0),
        "mean_rate": (float, 1e5),
        "duration": (float, 10.0),
        "background_fraction": (float, 0.0),
        "g2_zero": (float, None),
        "poisson": (bool, False),
        "seed": (int, 0),
    },
}

# sections that may appear several times as "<kind>.<name>"
_NAMED_SECTIONS = ("cylinder", "sphere")

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:\s#;][^=:]*?)\s*[=:]")


class RunConfig:
    def __init__(self, parser, lines, source="<string>"):
        self.source = source
        self._lines = lines
        self._values = {}
        for section in parser.sections():
            schema = self._schema_for(section)
            values = {}
            for key, text in parser.items(section, raw=True):
                if section == "materials":
                    kind = "material"
                elif key in schema:
                    kind = schema[key][0]
                else:
                    raise ConfigError("unknown key {!r} in [{}]".format(key, section),
                                      self._line_of(section, key))
                try:
                    values[key] = _parse(kind, text)
                except ValueError as exc:
                    raise ConfigError("bad value for {!r} in [{}]: {}".format(
                        key, section, exc), self._line_of(section, key))
            self._values[section] = values

    @classmethod
    def from_string(cls, text, source="<string>"):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0], _error_line(exc))
        return cls(parser, text.splitlines(), source)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as f:
                text = f.read()
        except OSError as exc:
            raise ConfigError("cannot read config {}: {}".format(path, exc.strerror))
        return cls.from_string(text, source=str(path))

    def _schema_for(self, section):
        if section == "materials":
            return {}
        kind = section.split(".", 1)[0]
        if kind in _NAMED_SECTIONS and "." in section:
            return SCHEMA[kind]
        if section in SCHEMA and section not in _NAMED_SECTIONS:
            return SCHEMA[section]
        raise ConfigError("unknown section [{}]".format(section),
                          self._line_of(section))

    def _line_of(self, section, key=None):
        current = None
        for lineno, line in enumerate(self._lines, start=1):
            match = _SECTION_RE.match(line)
            if match:
                current = match.group(1).strip()
                if key is None and current == section:
                    return lineno
                continue
            if key is not None and current == section:
                match = _KEY_RE.match(line)
                if match and match.group(1).strip().lower() == key:
                    return lineno
        return None

    def get(self, section, key):
        kind = section.split(".", 1)[0] if "." in section else section
        default = SCHEMA[kind][key][1]
        return self._values.get(section, {}).get(key, default)

    def section(self, name):
        """All keys of a section, defaults filled in."""
        kind = name.split(".", 1)[0] if "." in name else name
        values = {key: default for key, (_, default) in SCHEMA[kind].items()}
        values.update(self._values.get(name, {}))
        return values

    def named_sections(self, kind):
        return [s for s in self._values if s.startswith(kind + ".")]

    @property
    def materials(self):
        return dict(self._values.get("materials", {}))

    def quadrature(self):
        return QuadratureConfig(**self.section("quadrature"))

    def emitter(self):
        e = self.section("emitter")
        spectrum = SpectrumModel(center=e["spectrum_center"], std_dev=e["spectrum_std"],
                                 n_samples=e["spectrum_samples"])
        return EmitterModel(orientation=math.radians(e["orientation_deg"]),
                            radiative_rate_free=e["k_r0"],
                            nonradiative_rate=e["k_nr"],
                            spectrum=spectrum)

    def medium(self):
        return Medium(self.get("scene", "medium_eps"))


def _error_line(exc):
    lineno = getattr(exc, "lineno", None)
    if lineno is None and getattr(exc, "errors", None):
        lineno = exc.errors[0][0]
    return lineno
