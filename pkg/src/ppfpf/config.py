"""Experiment configuration: INI-style files, strict parsing, presets.

The file format is flat key = value pairs grouped into one [experiment]
section plus one optional section per filter. Unknown sections or keys
are rejected, and a seed is mandatory so every run is replayable. The
reference text and the built-in presets are generated from the same
schema table that drives parsing.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from io import StringIO

from .gain import GainSolverConfig

FILTER_NAMES = ("ppfpf", "bpf", "ekspf", "adf")
PRESETS = ("fig2_ou", "fig3_circle", "custom_ou")


class ConfigError(ValueError):
    """Configuration file failed parsing or validation."""


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_filters(text: str) -> tuple[str, ...]:
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    return names


def _parse_optional_int(text: str):
    if text.strip().lower() in ("none", "all"):
        return None
    return int(text)


# key -> (parser, default or PRESET sentinel, help)
PRESET_DEFAULT = object()

SCHEMA = {
    "experiment": {
        "preset": (str, None, "model preset: fig2_ou | fig3_circle | custom_ou (required)"),
        "seed": (int, None, "base RNG seed; repeats use seed, seed+1, ... (required)"),
        "dt": (float, 0.01, "time step"),
        "steps": (int, 10000, "number of filter steps"),
        "particles": (int, 200, "ensemble size N for the particle filters"),
        "repeats": (int, 1, "independent runs with consecutive seeds"),
        "filters": (_parse_filters, PRESET_DEFAULT,
                    "comma list from: ppfpf, bpf, ekspf, adf "
                    "(default: all four on the line, no adf on the circle)"),
        "oracle": (_parse_bool, True, "run the dense-grid reference solver"),
        "oracle_points": (int, 2001, "grid resolution of the reference solver"),
        "snapshot_every": (int, 0, "dump particle snapshots every k steps (0 = off)"),
    },
    "ppfpf": {
        "kernel": (str, PRESET_DEFAULT, "gaussian (line) | von_mises (circle)"),
        "bandwidth": (float, PRESET_DEFAULT, "Gaussian kernel eps in k = exp(-|x-y|^2/(4 eps))"),
        "concentration": (float, PRESET_DEFAULT, "von Mises kernel kappa"),
        "regularization": (float, PRESET_DEFAULT, "ridge weight lambda on the RKHS norm"),
        "jitter": (float, 1e-10, "absolute diagonal guard delta"),
        "max_centers": (_parse_optional_int, 64, "Galerkin center cap (none = every particle)"),
        "homotopy_steps": (int, 20, "Euler steps of the event flow"),
    },
    "bpf": {
        "resample_threshold": (float, 0.5, "resample when ESS/N drops below this"),
    },
    "ekspf": {},
    "adf": {},
    "custom": {
        "drift_coef": (float, -1.0, "OU drift coefficient a in dX = a X dt + sigma dW"),
        "diffusion": (float, 2.0, "noise variance rate sigma^2"),
        "intensity_coef": (float, 2.0, "intensity h(x) = coef * exp(slope * x)"),
        "intensity_slope": (float, 1.0, "intensity exponent slope"),
        "init_mean": (float, 0.0, "initial belief mean"),
        "init_var": (float, 1.0, "initial belief variance"),
        "domain_halfwidth": (float, 8.0, "oracle grid truncation [-w, w]"),
    },
}

GAIN_PRESET_DEFAULTS = {
    # kernel, bandwidth, concentration, regularization
    "fig2_ou": ("gaussian", 0.5, 1.0, 1e-6),
    "custom_ou": ("gaussian", 0.5, 1.0, 1e-6),
    "fig3_circle": ("von_mises", 0.5, 0.1, 1e-2),
}

FILTER_PRESET_DEFAULTS = {
    "fig2_ou": ("ppfpf", "bpf", "ekspf", "adf"),
    "custom_ou": ("ppfpf", "bpf", "ekspf", "adf"),
    "fig3_circle": ("ppfpf", "bpf", "ekspf"),
}


@dataclass
class ExperimentConfig:
    preset: str
    seed: int
    dt: float = 0.01
    steps: int = 10000
    particles: int = 200
    repeats: int = 1
    filters: tuple[str, ...] = FILTER_PRESET_DEFAULTS["fig2_ou"]
    oracle: bool = True
    oracle_points: int = 2001
    snapshot_every: int = 0
    gain: GainSolverConfig = GainSolverConfig()
    homotopy_steps: int = 20
    resample_threshold: float = 0.5
    custom: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {self.preset!r}; valid presets: {', '.join(PRESETS)}"
            )
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.particles < 2:
            raise ConfigError("particles must be >= 2")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not 0 < self.resample_threshold <= 1:
            raise ConfigError("resample_threshold must lie in (0, 1]")
        if self.oracle_points < 8:
            raise ConfigError("oracle_points must be >= 8")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        if not self.filters:
            raise ConfigError("at least one filter must be configured")
        unknown = [name for name in self.filters if name not in FILTER_NAMES]
        if unknown:
            raise ConfigError(
                f"unknown filter name(s) {', '.join(unknown)}; "
                f"valid names: {', '.join(FILTER_NAMES)}"
            )
        if len(set(self.filters)) != len(self.filters):
            raise ConfigError("duplicate filter names")
        if self.preset == "fig3_circle" and "adf" in self.filters:
            raise ConfigError(
                "the assumed-density filter runs on 1-D Euclidean presets only"
            )
        if self.preset == "custom_ou":
            if self.custom.get("diffusion", 2.0) <= 0:
                raise ConfigError("custom diffusion must be positive")
            if self.custom.get("intensity_coef", 2.0) <= 0:
                raise ConfigError("custom intensity_coef must be positive")
            if self.custom.get("init_var", 1.0) <= 0:
                raise ConfigError("custom init_var must be positive")
            if self.custom.get("domain_halfwidth", 8.0) <= 0:
                raise ConfigError("custom domain_halfwidth must be positive")
        return self


def _read_ini(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    return parser


def _parse_section(parser, section: str) -> dict:
    out = {}
    if not parser.has_section(section):
        return out
    schema = SCHEMA[section]
    for key, raw in parser.items(section):
        if key not in schema:
            raise ConfigError(
                f"unknown key {key!r} in [{section}]; "
                f"valid keys: {', '.join(sorted(schema)) or '(none)'}"
            )
        converter = schema[key][0]
        try:
            out[key] = converter(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for [{section}] {key} = {raw!r}: {exc}") from exc
    return out


def parse_config(path: str) -> ExperimentConfig:
    """Parse and validate an experiment file; unknown content is an error."""
    parser = _read_ini(path)
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(
                f"unknown section [{section}]; valid sections: "
                f"{', '.join(SCHEMA)}"
            )
    if not parser.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    exp = _parse_section(parser, "experiment")
    if "preset" not in exp:
        raise ConfigError("[experiment] preset is required")
    if "seed" not in exp:
        raise ConfigError("[experiment] seed is required (runs must be replayable)")
    preset = exp["preset"]
    if preset not in PRESETS:
        raise ConfigError(
            f"unknown preset {preset!r}; valid presets: {', '.join(PRESETS)}"
        )

    for key, (_, default, _) in SCHEMA["experiment"].items():
        if key in exp or default is None:
            continue
        exp[key] = FILTER_PRESET_DEFAULTS[preset] if default is PRESET_DEFAULT else default

    gain_raw = _parse_section(parser, "ppfpf")
    kernel_d, bandwidth_d, concentration_d, reg_d = GAIN_PRESET_DEFAULTS[preset]
    try:
        gain = GainSolverConfig(
            kernel=gain_raw.get("kernel", kernel_d),
            bandwidth=gain_raw.get("bandwidth", bandwidth_d),
            concentration=gain_raw.get("concentration", concentration_d),
            regularization=gain_raw.get("regularization", reg_d),
            jitter=gain_raw.get("jitter", 1e-10),
            max_centers=gain_raw.get("max_centers", 64),
        )
    except ValueError as exc:
        raise ConfigError(f"bad [ppfpf] gain settings: {exc}") from exc

    bpf_raw = _parse_section(parser, "bpf")
    _parse_section(parser, "ekspf")
    _parse_section(parser, "adf")
    custom_raw = _parse_section(parser, "custom")
    if custom_raw and preset != "custom_ou":
        raise ConfigError("[custom] section is only valid with preset = custom_ou")
    custom = {
        key: custom_raw.get(key, default)
        for key, (_, default, _) in SCHEMA["custom"].items()
    }

    cfg = ExperimentConfig(
        preset=preset,
        seed=exp["seed"],
        dt=exp["dt"],
        steps=exp["steps"],
        particles=exp["particles"],
        repeats=exp["repeats"],
        filters=exp["filters"],
        oracle=exp["oracle"],
        oracle_points=exp["oracle_points"],
        snapshot_every=exp["snapshot_every"],
        gain=gain,
        homotopy_steps=gain_raw.get("homotopy_steps", 20),
        resample_threshold=bpf_raw.get("resample_threshold", 0.5),
        custom=custom if preset == "custom_ou" else {},
    )
    return cfg.validate()


def config_reference_text() -> str:
    """Human-readable schema: every section, key, default, and meaning."""
    out = StringIO()
    out.write("Experiment file reference (INI syntax, '#' comments)\n")
    out.write("=" * 56 + "\n")
    for section, keys in SCHEMA.items():
        out.write(f"\n[{section}]\n")
        if not keys:
            out.write("  (no keys; section may be present but empty)\n")
        for key, (_, default, help_text) in keys.items():
            if default is None:
                shown = "REQUIRED"
            elif default is PRESET_DEFAULT:
                shown = "preset-dependent"
            else:
                shown = repr(default)
            out.write(f"  {key:<20} default: {shown}\n      {help_text}\n")
    out.write(
        "\nPreset gain defaults (kernel, bandwidth, concentration, "
        "regularization):\n"
    )
    for preset, values in GAIN_PRESET_DEFAULTS.items():
        out.write(f"  {preset:<12} {values}\n")
    return out.getvalue()


PRESET_TEXTS = {
    "fig2_ou": """\
# Ornstein-Uhlenbeck state on the line, one exponential intensity channel:
#   dX = -X dt + sqrt(2) dW,   h(x) = 2 exp(x)
[experiment]
preset = fig2_ou
seed = 1
dt = 0.01
steps = 10000
particles = 200
filters = ppfpf, bpf, ekspf, adf
oracle = true

[ppfpf]
kernel = gaussian
bandwidth = 0.5
regularization = 1e-6
homotopy_steps = 20

[bpf]
resample_threshold = 0.5
""",
    "fig3_circle": """\
# Brownian motion on the circle, four von Mises bump intensities:
#   dTheta = dW,   h_i(t) = 20 exp(10 (cos(t - i pi/2) - 1)),  i = 1..4
[experiment]
preset = fig3_circle
seed = 1
dt = 0.01
steps = 10000
particles = 200
filters = ppfpf, bpf, ekspf
oracle = true

[ppfpf]
kernel = von_mises
concentration = 0.1
regularization = 1e-2
homotopy_steps = 20

[bpf]
resample_threshold = 0.5
""",
}


def preset_text() -> str:
    parts = []
    for name, text in PRESET_TEXTS.items():
        parts.append(f"### {name}\n{text}")
    return "\n".join(parts)
