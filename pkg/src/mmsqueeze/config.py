"""Experiment configuration: INI text with one section per pipeline stage."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigurationError
from .sellmeier import DEFAULT_SELLMEIER


@dataclass(frozen=True)
class PumpSection:
    center_nm: float = 397.5
    fwhm_nm: float = 0.7


@dataclass(frozen=True)
class PhaseMatchingSection:
    poling_um: float = 3.19
    length_mm: float = 1.0
    temperature_C: float = 89.1
    sellmeier_set: str = DEFAULT_SELLMEIER
    waveguide_correction: str = "degenerate"


@dataclass(frozen=True)
class GridSection:
    lambda_min_nm: float = 695.0
    lambda_max_nm: float = 895.0
    n_points: int = 512


@dataclass(frozen=True)
class ModesSection:
    n_supermodes: int = 21  # rows of the squeezing table
    n_state_modes: int = 256  # supermodes kept in the simulated state
    hg0_fwhm_nm: float = 18.0
    lo_center_nm: float = 795.0
    lo_fwhm_nm: float = 42.0
    frexel_edges_nm: tuple = (775.0, 780.0, 785.0, 790.0, 795.0, 800.0, 805.0, 810.0, 815.0)


@dataclass(frozen=True)
class CalibrationSection:
    target_hg0_dB: float = -0.47
    eta_total: float = 0.7


@dataclass(frozen=True)
class PulseSection:
    rep_rate_hz: float = 156e6
    samples_per_pulse: int = 64
    detector_bandwidth_hz: float = 300e6
    clearance_dB: float = 10.0
    cmrr_dB: float = 64.0
    n_pulses: int = 1_000_000
    n_vacuum_pulses: int = 100_000
    n_dark_pulses: int = 20_000
    piezo_period_pulses: int = 100_000
    modes: tuple = ("hg0",)
    record_pulses: int = 10_000
    seed: int = 1


@dataclass(frozen=True)
class NoiseSection:
    variance_noise_dB: float = 0.05
    seed: int = 7


SECTIONS = {
    "pump": PumpSection,
    "phase_matching": PhaseMatchingSection,
    "grid": GridSection,
    "modes": ModesSection,
    "calibration": CalibrationSection,
    "pulse": PulseSection,
    "noise": NoiseSection,
}

# fields that may be zero or negative
_SIGNED = {"target_hg0_dB", "temperature_C", "seed", "clearance_dB", "cmrr_dB", "variance_noise_dB"}


@dataclass(frozen=True)
class ExperimentConfig:
    pump: PumpSection = field(default_factory=PumpSection)
    phase_matching: PhaseMatchingSection = field(default_factory=PhaseMatchingSection)
    grid: GridSection = field(default_factory=GridSection)
    modes: ModesSection = field(default_factory=ModesSection)
    calibration: CalibrationSection = field(default_factory=CalibrationSection)
    pulse: PulseSection = field(default_factory=PulseSection)
    noise: NoiseSection = field(default_factory=NoiseSection)

    def __post_init__(self):
        for name in SECTIONS:
            for f in fields(getattr(self, name)):
                v = getattr(getattr(self, name), f.name)
                if f.name in _SIGNED or isinstance(v, (str, tuple)):
                    continue
                if not v > 0:
                    raise ConfigurationError(f"[{name}] {f.name} must be positive, got {v}")
        if self.pulse.record_pulses > self.pulse.n_pulses:
            object.__setattr__(self, "pulse", replace(self.pulse, record_pulses=self.pulse.n_pulses))
        if self.noise.variance_noise_dB < 0:
            raise ConfigurationError("[noise] variance_noise_dB must be non-negative")
        if not 0 < self.calibration.eta_total <= 1:
            raise ConfigurationError("[calibration] eta_total must lie in (0, 1]")

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            d = asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        return out

    def to_ini(self) -> str:
        lines = []
        for name, d in self.to_dict().items():
            lines.append(f"[{name}]")
            for k, v in d.items():
                text = ", ".join(map(str, v)) if isinstance(v, list) else str(v)
                lines.append(f"{k} = {text}")
            lines.append("")
        return "\n".join(lines)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(
            self,
            pulse=replace(self.pulse, seed=seed),
            noise=replace(self.noise, seed=seed),
        )


def _convert(section: str, key: str, default, text: str):
    try:
        if isinstance(default, tuple):
            items = [s.strip() for s in text.replace(",", " ").split()]
            conv = float if default and isinstance(default[0], float) else str
            return tuple(conv(s) for s in items)
        if isinstance(default, bool):
            return text.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(float(text)) if float(text).is_integer() else int(text)
        if isinstance(default, float):
            return float(text)
        return text.strip()
    except ValueError:
        raise ConfigurationError(f"[{section}] {key}: cannot parse {text!r}") from None


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case (temperature_C, target_hg0_dB)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    sections = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigurationError(f"{source}: unknown section [{name}]")
        cls = SECTIONS[name]
        defaults = cls()
        known = {f.name for f in fields(cls)}
        values = {}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigurationError(f"{source}: unknown key {key!r} in [{name}]")
            values[key] = _convert(name, key, getattr(defaults, key), raw)
        sections[name] = replace(defaults, **values)
    return ExperimentConfig(**sections)


def load_config(path=None) -> ExperimentConfig:
    """Defaults when ``path`` is None, otherwise defaults overridden by the file."""
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    return parse_config(p.read_text(), str(p))
