"""Scenario configuration: flat `section.key = value` text files.

Example:

    # measured link
    atmosphere.cn2 = 1.28e-14
    beam.w0 = 1.74e-3
    geometry.d_fs = 1400.0
    source.mix_ratio = 30:2:1
    detector.eta_b = 0.22387211385683395
    seeds.alice = 11

Units are SI throughout (meters, seconds); attenuation coefficients are
dB/km; efficiencies (eta_b, eta_d) are linear transmittances. Unknown
sections or keys are rejected. parse -> serialize -> parse is a fixed
point on the parsed value (floats are serialized via repr, which
round-trips exactly).

Required sections: atmosphere, beam, geometry, source, detector, seeds.
Optional: protocol (defaults applied), sweep, montecarlo, jitter.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .optics import AtmosphereParams, BeamParams, JitterSpec, LinkGeometry
from .protocol.session import ProtocolParams, Seeds, SessionSpec
from .rates import DetectorConfig, SourceConfig


@dataclass(frozen=True)
class SweepGrid:
    d_fs_start: float
    d_fs_stop: float
    d_fs_step: float

    def __post_init__(self):
        if self.d_fs_step <= 0:
            raise ValueError("d_fs_step must be positive")

    def points(self) -> list:
        """Ascending grid; empty when stop < start."""
        out = []
        d = self.d_fs_start
        while d <= self.d_fs_stop + 1e-9:
            out.append(d)
            d += self.d_fs_step
        return out


@dataclass(frozen=True)
class McParams:
    n_pulses: int

    def __post_init__(self):
        if self.n_pulses <= 0:
            raise ValueError("n_pulses must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    atmosphere: AtmosphereParams
    beam: BeamParams
    geometry: LinkGeometry
    source: SourceConfig
    detector: DetectorConfig
    seeds: Seeds
    protocol: ProtocolParams
    sweep: Optional[SweepGrid] = None
    montecarlo: Optional[McParams] = None
    jitter: Optional[JitterSpec] = None

    def session_spec(self) -> SessionSpec:
        return SessionSpec(
            atm=self.atmosphere,
            beam=self.beam,
            geom=self.geometry,
            src=self.source,
            det=self.detector,
            protocol=self.protocol,
            seeds=self.seeds,
            jitter=self.jitter,
        )


# (section, key) -> type tag; "ratio" is the a:b:c form
_SCHEMA = {
    "atmosphere": {"cn2": float, "l0": float, "alpha_fs": float},
    "beam": {"w0": float, "gamma": float, "wavelength": float},
    "geometry": {
        "d_fs": float,
        "d_fiber": float,
        "a_r": float,
        "conv_loss_db": float,
        "adapter_loss_db": float,
        "alpha_fiber": float,
    },
    "source": {"mu": float, "nu": float, "mix_ratio": "ratio", "rep_rate": float, "q": float},
    "detector": {
        "p_d": float,
        "eta_d": float,
        "visibility": float,
        "e_mis": float,
        "f_ec": float,
        "eta_b": float,
    },
    "seeds": {"alice": int, "bob": int, "channel": int},
    "protocol": {
        "fec_ratio": int,
        "spread_ratio": int,
        "qber_threshold": float,
        "sample_fraction": float,
        "duty_cycle": float,
        "n_frames": int,
        "initial_pool_bits": int,
    },
    "sweep": {"d_fs_start": float, "d_fs_stop": float, "d_fs_step": float},
    "montecarlo": {"n_pulses": int},
    "jitter": {"max_db": float, "tau_s": float, "step_db": float},
}

_REQUIRED = ("atmosphere", "beam", "geometry", "source", "detector", "seeds")

# keys that may be omitted inside otherwise-required sections
_OPTIONAL_KEYS = {
    "source": {"rep_rate", "q", "mix_ratio"},
    "detector": {"e_mis", "f_ec"},
}

_SECTION_ORDER = (
    "atmosphere",
    "beam",
    "geometry",
    "source",
    "detector",
    "seeds",
    "protocol",
    "sweep",
    "montecarlo",
    "jitter",
)


def _parse_value(section: str, key: str, raw: str, lineno: int):
    kind = _SCHEMA[section][key]
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind == "ratio":
            parts = tuple(int(p) for p in raw.split(":"))
            if len(parts) != 3:
                raise ValueError("need three colon-separated integers")
            return parts
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {section}.{key}: {exc}") from exc
    raise ConfigError(f"internal schema error for {section}.{key}")


def parse_config(text: str) -> ScenarioConfig:
    """Parse configuration text into a fully validated ScenarioConfig."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        lhs, _, rhs = stripped.partition("=")
        lhs = lhs.strip()
        rhs = rhs.split("#", 1)[0].strip()
        if "." not in lhs:
            raise ConfigError(f"line {lineno}: key '{lhs}' lacks a section prefix")
        section, _, key = lhs.partition(".")
        if section not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown section '{section}'")
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key '{section}.{key}'")
        if (section, key) in values:
            raise ConfigError(f"line {lineno}: duplicate key '{section}.{key}'")
        values[(section, key)] = _parse_value(section, key, rhs, lineno)

    def section_dict(name: str) -> dict:
        return {k: v for (s, k), v in values.items() if s == name}

    present = {s for s, _ in values}
    for name in _REQUIRED:
        if name not in present:
            raise ConfigError(f"missing required section '{name}'")
        missing = set(_SCHEMA[name]) - set(section_dict(name)) - _OPTIONAL_KEYS.get(name, set())
        if missing:
            raise ConfigError(
                f"section '{name}' missing required keys: {', '.join(sorted(missing))}"
            )

    try:
        atmosphere = AtmosphereParams(**section_dict("atmosphere"))
        beam = BeamParams(**section_dict("beam"))
        geometry = LinkGeometry(**section_dict("geometry"))
        source = SourceConfig(**section_dict("source"))
        detector = DetectorConfig(**section_dict("detector"))
        seeds = Seeds(**section_dict("seeds"))
        protocol = ProtocolParams(**section_dict("protocol"))
        sweep = SweepGrid(**section_dict("sweep")) if section_dict("sweep") else None
        mc = McParams(**section_dict("montecarlo")) if section_dict("montecarlo") else None
        jitter = JitterSpec(**section_dict("jitter")) if section_dict("jitter") else None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    return ScenarioConfig(
        atmosphere=atmosphere,
        beam=beam,
        geometry=geometry,
        source=source,
        detector=detector,
        seeds=seeds,
        protocol=protocol,
        sweep=sweep,
        montecarlo=mc,
        jitter=jitter,
    )


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ":".join(str(v) for v in value)
    if isinstance(value, bool):
        return str(int(value))
    return repr(value) if isinstance(value, float) else str(value)


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) == cfg."""
    sections = {
        "atmosphere": {
            "cn2": cfg.atmosphere.cn2,
            "l0": cfg.atmosphere.l0,
            "alpha_fs": cfg.atmosphere.alpha_fs,
        },
        "beam": {
            "w0": cfg.beam.w0,
            "gamma": cfg.beam.gamma,
            "wavelength": cfg.beam.wavelength,
        },
        "geometry": {
            "d_fs": cfg.geometry.d_fs,
            "d_fiber": cfg.geometry.d_fiber,
            "a_r": cfg.geometry.a_r,
            "conv_loss_db": cfg.geometry.conv_loss_db,
            "adapter_loss_db": cfg.geometry.adapter_loss_db,
            "alpha_fiber": cfg.geometry.alpha_fiber,
        },
        "source": {
            "mu": cfg.source.mu,
            "nu": cfg.source.nu,
            "mix_ratio": cfg.source.mix_ratio,
            "rep_rate": cfg.source.rep_rate,
            "q": cfg.source.q,
        },
        "detector": {
            "p_d": cfg.detector.p_d,
            "eta_d": cfg.detector.eta_d,
            "visibility": cfg.detector.visibility,
            "e_mis": cfg.detector.e_mis,
            "f_ec": cfg.detector.f_ec,
            "eta_b": cfg.detector.eta_b,
        },
        "seeds": {
            "alice": cfg.seeds.alice,
            "bob": cfg.seeds.bob,
            "channel": cfg.seeds.channel,
        },
        "protocol": {
            "fec_ratio": cfg.protocol.fec_ratio,
            "spread_ratio": cfg.protocol.spread_ratio,
            "qber_threshold": cfg.protocol.qber_threshold,
            "sample_fraction": cfg.protocol.sample_fraction,
            "duty_cycle": cfg.protocol.duty_cycle,
            "n_frames": cfg.protocol.n_frames,
            "initial_pool_bits": cfg.protocol.initial_pool_bits,
        },
    }
    if cfg.sweep is not None:
        sections["sweep"] = {
            "d_fs_start": cfg.sweep.d_fs_start,
            "d_fs_stop": cfg.sweep.d_fs_stop,
            "d_fs_step": cfg.sweep.d_fs_step,
        }
    if cfg.montecarlo is not None:
        sections["montecarlo"] = {"n_pulses": cfg.montecarlo.n_pulses}
    if cfg.jitter is not None:
        sections["jitter"] = {
            "max_db": cfg.jitter.max_db,
            "tau_s": cfg.jitter.tau_s,
            "step_db": cfg.jitter.step_db,
        }
    lines = []
    for name in _SECTION_ORDER:
        if name not in sections:
            continue
        for key in _SCHEMA[name]:
            if key in sections[name]:
                lines.append(f"{name}.{key} = {_format_value(sections[name][key])}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ScenarioConfig) -> str:
    """Stable identity of a scenario: sha256 of its canonical text."""
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()
