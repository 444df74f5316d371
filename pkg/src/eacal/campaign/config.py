"""Campaign configuration: flat ``key = value`` files and on-body presets.

A config file is a flat list of dotted keys (a TOML subset)::

    schema_version = 1
    preset = "C"            # optional, applied before the keys below
    seed = 42
    anchors.count = 200
    gain.notch_depth_db = 20.0

Positions of the extended antenna are given in the body frame (forward
along the heading, left counter-clockwise of it); angles in degrees.
Unknown keys are rejected.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from ..ea_model import ExtendedAntennaModel, GainSpec, MarkSpec
from ..errors import ParseError
from ..estimator import GridSpec, StoppingRule
from ..geometry import FrameSpec, Point2
from ..waveform import NoiseSpec, PulseSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
LABELS = ("0", "C", "L", "R")

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "on_body_label": "0",
    "seed": 0,
    "pulse.carrier_hz": 6.95e9,
    "pulse.sample_rate_hz": 12.8e9,
    "pulse.n_samples": 512,
    "pulse.bandwidth_hz": 6.4e9,
    "pulse.rolloff": 0.6,
    "pulse.span_symbols": 6.0,
    "frame.origin_x": 0.0,
    "frame.origin_y": 0.0,
    "frame.heading_deg": 0.0,
    "anchors.radius": 2.5,
    "anchors.count": 200,
    "ea.offset_forward": 0.0,
    "ea.offset_left": 0.0,
    "ea.std_forward": 0.02,
    "ea.std_left": 0.02,
    "ea.mean_count": 5.0,
    "marks.base_magnitude": 0.08,
    "marks.angular_width_deg": 30.0,
    "marks.random_phase": True,
    "gain.max_gain": 1.0,
    "gain.notch_direction_deg": 180.0,
    "gain.notch_depth_db": 3.0,
    "gain.notch_width_deg": 90.0,
    "noise.snr_db": 30.0,
    "noise.variance": None,
    "grid.half_width": 0.75,
    "grid.step": 0.02,
    "stopping.gamma": 3.0,
    "stopping.max_points": 16,
    "stopping.refine": False,
    "report.sectors": 36,
    "report.ellipse_scale": 2.0,
}

# Body-frame layouts for the four on-body positions: 0 is the antenna alone,
# C/L/R put the body behind the agent (blocking around 180 deg) with the
# agent centred, on the left or on the right of the upper torso.
PRESETS = {
    "0": {"on_body_label": "0"},
    "C": {
        "on_body_label": "C",
        "ea.offset_forward": -0.12,
        "ea.offset_left": 0.0,
        "ea.std_forward": 0.12,
        "ea.std_left": 0.07,
        "ea.mean_count": 9.0,
        "marks.base_magnitude": 0.05,
        "marks.angular_width_deg": 35.0,
        "gain.notch_direction_deg": 180.0,
        "gain.notch_depth_db": 20.0,
        "gain.notch_width_deg": 100.0,
    },
    "L": {
        "on_body_label": "L",
        "ea.offset_forward": -0.10,
        "ea.offset_left": -0.10,
        "ea.std_forward": 0.07,
        "ea.std_left": 0.12,
        "ea.mean_count": 5.0,
        "marks.base_magnitude": 0.05,
        "marks.angular_width_deg": 35.0,
        "gain.notch_direction_deg": 165.0,
        "gain.notch_depth_db": 20.0,
        "gain.notch_width_deg": 100.0,
    },
    "R": {
        "on_body_label": "R",
        "ea.offset_forward": -0.10,
        "ea.offset_left": 0.10,
        "ea.std_forward": 0.07,
        "ea.std_left": 0.12,
        "ea.mean_count": 9.0,
        "marks.base_magnitude": 0.05,
        "marks.angular_width_deg": 35.0,
        "gain.notch_direction_deg": -165.0,
        "gain.notch_depth_db": 20.0,
        "gain.notch_width_deg": 100.0,
    },
}

# Reduced problem size for quick runs and the test suite.
SMALL = {
    "anchors.count": 32,
    "pulse.n_samples": 256,
    "grid.half_width": 0.4,
    "grid.step": 0.04,
}


@dataclass(frozen=True)
class CampaignConfig:
    pulse: PulseSpec = field(default_factory=PulseSpec)
    frame: FrameSpec = field(default_factory=lambda: FrameSpec(Point2(0.0, 0.0), 0.0))
    anchor_radius: float = 2.5
    n_snapshots: int = 200
    ea: ExtendedAntennaModel | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    snr_db: float | None = 30.0
    grid: GridSpec | None = None
    stopping: StoppingRule = field(default_factory=StoppingRule)
    on_body_label: str = "0"
    seed: int = 0
    n_sectors: int = 36
    ellipse_scale: float = 2.0
    params: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.n_snapshots < 1:
            raise ValueError("n_snapshots must be >= 1")
        if self.anchor_radius <= 0:
            raise ValueError("anchor radius must be positive")
        if self.on_body_label not in LABELS:
            raise ValueError(f"on_body_label must be one of {LABELS}")
        if self.n_sectors < 1:
            raise ValueError("n_sectors must be >= 1")

    def with_seed(self, seed: int) -> "CampaignConfig":
        params = dict(self.params, seed=int(seed))
        return replace(self, seed=int(seed), noise=replace(self.noise, seed=int(seed)), params=params)


def flat_params(preset: str | None = None, overrides=None, small=False) -> dict:
    params = dict(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ParseError(f"unknown preset {preset!r}; expected one of {LABELS}")
        params.update(PRESETS[preset])
    if small:
        params.update(SMALL)
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ParseError(f"unknown config key {key!r}")
        params[key] = value
    return params


def build_config(params: dict) -> CampaignConfig:
    """Turn a flat parameter mapping into a validated :class:`CampaignConfig`."""
    p = dict(DEFAULTS)
    p.update(params)
    unknown = set(p) - set(DEFAULTS)
    if unknown:
        raise ParseError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if int(p["schema_version"]) != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {p['schema_version']}")
    try:
        pulse = PulseSpec(
            carrier_hz=float(p["pulse.carrier_hz"]),
            sample_rate_hz=float(p["pulse.sample_rate_hz"]),
            n_samples=int(p["pulse.n_samples"]),
            bandwidth_hz=float(p["pulse.bandwidth_hz"]),
            rolloff=float(p["pulse.rolloff"]),
            span_symbols=float(p["pulse.span_symbols"]),
        )
        frame = FrameSpec(
            Point2(float(p["frame.origin_x"]), float(p["frame.origin_y"])),
            math.radians(float(p["frame.heading_deg"])),
        )
        mu = frame.to_world(float(p["ea.offset_forward"]), float(p["ea.offset_left"]))
        rot = frame.rotation()
        local = np.diag([float(p["ea.std_forward"]) ** 2, float(p["ea.std_left"]) ** 2])
        sigma = rot @ local @ rot.T
        ea = ExtendedAntennaModel(
            mu=mu,
            sigma=0.5 * (sigma + sigma.T),
            mean_count=float(p["ea.mean_count"]),
            marks=MarkSpec(
                base_magnitude=float(p["marks.base_magnitude"]),
                angular_width=math.radians(float(p["marks.angular_width_deg"])),
                random_phase=bool(p["marks.random_phase"]),
            ),
            los_gain=GainSpec(
                max_gain=float(p["gain.max_gain"]),
                notch_direction=math.radians(float(p["gain.notch_direction_deg"])),
                notch_depth_db=float(p["gain.notch_depth_db"]),
                notch_width=math.radians(float(p["gain.notch_width_deg"])),
            ),
        )
        seed = int(p["seed"])
        variance = p["noise.variance"]
        snr_db = p["noise.snr_db"]
        if variance is not None:
            snr_db = None
        noise = NoiseSpec(float(variance or 0.0), seed)
        grid = GridSpec.centered(frame.origin, float(p["grid.half_width"]), float(p["grid.step"]))
        stopping = StoppingRule(
            gamma=float(p["stopping.gamma"]),
            max_points=int(p["stopping.max_points"]),
            refine=bool(p["stopping.refine"]),
        )
        return CampaignConfig(
            pulse=pulse,
            frame=frame,
            anchor_radius=float(p["anchors.radius"]),
            n_snapshots=int(p["anchors.count"]),
            ea=ea,
            noise=noise,
            snr_db=None if snr_db is None else float(snr_db),
            grid=grid,
            stopping=stopping,
            on_body_label=str(p["on_body_label"]),
            seed=seed,
            n_sectors=int(p["report.sectors"]),
            ellipse_scale=float(p["report.ellipse_scale"]),
            params=p,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"invalid configuration: {exc}") from exc


def preset_config(label: str, small=False, **overrides) -> CampaignConfig:
    """Config for one of the on-body presets; ``overrides`` use flat keys with
    dots replaced by double underscores (``anchors__count=64``)."""
    flat = {k.replace("__", "."): v for k, v in overrides.items()}
    return build_config(flat_params(label, flat, small=small))


def _flatten(tree, prefix=""):
    out = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def parse_config_text(text: str) -> dict:
    """Parse config text into a flat mapping (preset key kept separate)."""
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"malformed config: {exc}") from exc
    return _flatten(tree)


def load_config(path=None, preset=None, small=False, overrides=None) -> CampaignConfig:
    """Read a config file (optional) on top of a preset (optional)."""
    flat = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            flat = parse_config_text(fh.read())
    file_preset = flat.pop("preset", None)
    preset = preset or file_preset
    if "schema_version" in flat and int(flat["schema_version"]) != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {flat['schema_version']}")
    flat.update(overrides or {})
    return build_config(flat_params(preset, flat, small=small))


def dump_config(config: CampaignConfig) -> str:
    """Flat text form of the parameters a config was built from."""
    lines = []
    for key in DEFAULTS:
        value = config.params.get(key, DEFAULTS[key])
        if value is None:
            continue
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, str):
            text = f'"{value}"'
        else:
            text = repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
