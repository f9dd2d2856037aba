"""Run configuration: a strict sectioned key-value file.

Example::

    [physics]
    photon_energy = 1.2
    intensity = 2e11

    [band.ob21]
    parity = odd
    q = 21

Every section and key is validated; unknown names, bad values and missing
files raise :class:`ConfigError` with the offending line.  Values not given
take the defaults below.  Band sections replace the default band set.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .constants import IONISATION_LIMIT_EV, IR_PHOTON_EV


class ConfigError(ValueError):
    """Invalid configuration; the message names the line and key."""


@dataclass(frozen=True)
class PhysicsSection:
    photon_energy: float = IR_PHOTON_EV
    dissociation_limit: float = IONISATION_LIMIT_EV
    intensity: float = 2e11
    curves: str = "embedded"  # embedded | morse | files
    vg_file: str = ""
    vu_file: str = ""
    coupling: str = "charge_resonance"
    coupling_d0: float = 1.0
    taper_start: float = 8.0
    taper_end: float = 20.0  # <= 0 disables the taper
    r_max: float = 40.0


@dataclass(frozen=True)
class XuvSection:
    orders: str = "auto"  # auto, "15-23" or "15,17,19"
    chirp_step: float = 0.0
    phases: str = ""  # explicit comma-separated phases, overrides chirp_step


@dataclass(frozen=True)
class BandSection:
    name: str
    parity: str
    q: int
    gs_amplitude: float = 1.0
    gs_decay: float = 4.0
    bs_height: float = 0.3
    bs_center: float = 0.6
    bs_width: float = 0.15
    partial_waves: tuple = (1, 1, 1)
    path_scale: tuple = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class SimulationSection:
    events: int = 1_000_000
    seed: int = 1
    delay_count: int = 32
    delay_periods: float = 2.0
    delays: str = ""  # explicit comma-separated fs values
    smear_electron: float = 0.01
    smear_ion: float = 0.3
    ker_max: float = 1.5
    threads: int = 1


@dataclass(frozen=True)
class AnalysisSection:
    ker_bin: float = 0.05
    ee_bin: float = 0.1
    ker_max: float = 2.5
    ee_max: float = 12.0
    half_width: float = 0.35
    fit_ker_min: float = 0.0
    fit_ker_max: float = 0.35
    probe_ker: float = 0.6
    subtract_mean: bool = False
    chirp: str = "auto"  # auto (retrieve from sidebands) | none
    refine_exponential: bool = False


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple = ("csv", "json", "png", "script")


@dataclass(frozen=True)
class RunConfig:
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    xuv: XuvSection = field(default_factory=XuvSection)
    bands: tuple = ()
    simulation: SimulationSection = field(default_factory=SimulationSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output: OutputSection = field(default_factory=OutputSection)
    source: str = ""

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("source")
        d["output"].pop("directory")  # where files go is not part of the run
        return d

    def digest(self) -> bytes:
        """SHA-256 of the resolved configuration (defaults included)."""
        text = json.dumps(self.canonical(), sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).digest()

    @property
    def hash_hex(self) -> str:
        return self.digest().hex()

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, simulation=replace(self.simulation, seed=int(seed)))

    def with_threads(self, threads: int) -> "RunConfig":
        return replace(self, simulation=replace(self.simulation, threads=int(threads)))

    def with_output(self, directory) -> "RunConfig":
        return replace(self, output=replace(self.output, directory=str(directory)))


_SECTIONS = {
    "physics": PhysicsSection,
    "xuv": XuvSection,
    "simulation": SimulationSection,
    "analysis": AnalysisSection,
    "output": OutputSection,
}
_BAND_KEYS = {f for f in BandSection.__dataclass_fields__ if f != "name"}
_CHOICES = {
    ("physics", "curves"): {"embedded", "morse", "files"},
    ("physics", "coupling"): {"charge_resonance", "constant"},
    ("analysis", "chirp"): {"auto", "none"},
    ("band", "parity"): {"odd", "even"},
}
_FORMATS = {"csv", "json", "png", "script", "events_csv"}


def _line_index(text: str) -> dict:
    """(section, key) -> line number, section -> line number."""
    where = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            where.setdefault(section, n)
            continue
        key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
        where.setdefault((section, key), n)
    return where


def _convert(value: str, target, where: str):
    try:
        if isinstance(target, bool):
            low = value.strip().lower()
            if low in {"1", "true", "yes", "on"}:
                return True
            if low in {"0", "false", "no", "off"}:
                return False
            raise ValueError(value)
        if isinstance(target, int):
            try:
                return int(value)
            except ValueError:
                f = float(value)  # accept 1e6 style counts
                if not f.is_integer():
                    raise ValueError("not an integer") from None
                return int(f)
        if isinstance(target, float):
            return float(value)
        if isinstance(target, tuple):
            parts = [p.strip() for p in value.split(",") if p.strip()]
            if target and isinstance(target[0], (int, float)):
                kind = type(target[0])
                out = tuple(kind(float(p)) if kind is int else float(p) for p in parts)
                if len(out) != len(target):
                    raise ValueError(f"expected {len(target)} values")
                return out
            return tuple(parts)
        return value.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {value!r} ({exc})") from None


def parse_config(text: str, origin: str = "<config>", base_dir: Path | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True, delimiters=("=", ":"),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    lines = _line_index(text)

    def loc(section, key=None):
        n = lines.get((section, key) if key else section)
        return f"{origin}:{n}" if n else origin

    sections = {}
    bands = []
    for name in parser.sections():
        if name.startswith("band."):
            cls, label = BandSection, name[5:].strip()
            if not label:
                raise ConfigError(f"{loc(name)}: band section needs a name, e.g. [band.ob21]")
        elif name in _SECTIONS:
            cls, label = _SECTIONS[name], None
        else:
            raise ConfigError(f"{loc(name)}: unknown section [{name}]")
        defaults = cls.__dataclass_fields__
        values = {}
        for key, raw in parser.items(name):
            allowed = _BAND_KEYS if cls is BandSection else set(defaults)
            if key not in allowed:
                raise ConfigError(f"{loc(name, key)}: unknown key {key!r} in [{name}]")
            fld = defaults[key]
            proto = fld.default if fld.default is not fld.default_factory else None
            if cls is BandSection and key in ("q",):
                proto = 0
            values[key] = _convert(raw, proto, f"{loc(name, key)} [{name}] {key}")
            kind = "band" if cls is BandSection else name
            choices = _CHOICES.get((kind, key))
            if choices and str(values[key]).lower() not in choices:
                raise ConfigError(f"{loc(name, key)}: {key} must be one of {sorted(choices)}")
            if isinstance(values[key], str) and choices:
                values[key] = values[key].lower()
        if cls is BandSection:
            for req in ("parity", "q"):
                if req not in values:
                    raise ConfigError(f"{loc(name)}: [{name}] needs '{req}'")
            try:
                bands.append(BandSection(name=label, **values))
            except TypeError as exc:
                raise ConfigError(f"{loc(name)}: {exc}") from None
        else:
            sections[name] = cls(**values)
    cfg = RunConfig(bands=tuple(bands), source=origin, **sections)
    _validate(cfg, loc, base_dir)
    return cfg


def _validate(cfg: RunConfig, loc, base_dir: Path | None):
    p = cfg.physics
    if not p.photon_energy > 0:
        raise ConfigError(f"{loc('physics', 'photon_energy')}: photon_energy must be > 0")
    if not p.intensity > 0:
        raise ConfigError(f"{loc('physics', 'intensity')}: intensity must be > 0")
    if p.curves == "files":
        for key in ("vg_file", "vu_file"):
            path = getattr(p, key)
            if not path:
                raise ConfigError(f"{loc('physics', 'curves')}: curves = files needs {key}")
            full = Path(path) if base_dir is None or Path(path).is_absolute() else base_dir / path
            if not full.is_file():
                raise ConfigError(f"{loc('physics', key)}: file not found: {path}")
    s = cfg.simulation
    if s.events <= 0:
        raise ConfigError(f"{loc('simulation', 'events')}: events must be > 0")
    if s.smear_electron < 0 or s.smear_ion < 0:
        raise ConfigError(f"{loc('simulation', 'smear_electron')}: smearing must be >= 0")
    if s.threads < 1:
        raise ConfigError(f"{loc('simulation', 'threads')}: threads must be >= 1")
    if not s.delays and (s.delay_count < 1 or s.delay_periods <= 0):
        raise ConfigError(f"{loc('simulation', 'delay_count')}: need delay_count >= 1 and delay_periods > 0")
    a = cfg.analysis
    if a.ker_bin <= 0 or a.ee_bin <= 0 or a.half_width <= 0:
        raise ConfigError(f"{loc('analysis')}: bin sizes and half_width must be > 0")
    bad = set(cfg.output.formats) - _FORMATS
    if bad:
        raise ConfigError(f"{loc('output', 'formats')}: unknown formats {sorted(bad)}")
    seen = set()
    for b in cfg.bands:
        if b.q % 2 == 0:
            raise ConfigError(f"{loc('band.' + b.name, 'q')}: q must be odd")
        key = (b.parity, b.q)
        if key in seen:
            raise ConfigError(f"{loc('band.' + b.name)}: duplicate band {b.parity} q={b.q}")
        seen.add(key)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path), path.parent)


def default_config() -> RunConfig:
    return parse_config("", "<defaults>")


def resolve_delays(cfg: RunConfig, period: float) -> np.ndarray:
    s = cfg.simulation
    if s.delays:
        return np.array([float(x) for x in s.delays.split(",") if x.strip()])
    return np.arange(s.delay_count) * s.delay_periods * period / s.delay_count


def parse_orders(spec: str) -> list[int]:
    spec = spec.strip()
    if "-" in spec and "," not in spec:
        lo, hi = (int(x) for x in spec.split("-"))
        return list(range(lo, hi + 1, 2))
    return [int(x) for x in spec.split(",") if x.strip()]


DEFAULT_CONFIG_TEXT = """\
# Default run configuration (every key shown with its default value).

[physics]
photon_energy = 1.2        # eV
dissociation_limit = 18.1  # eV
intensity = 2e11           # W/cm^2
curves = embedded          # embedded | morse | files
coupling = charge_resonance
taper_start = 8.0          # a.u.
taper_end = 20.0           # a.u.; <= 0 keeps the bare R/2 dipole
r_max = 40.0               # a.u.

[xuv]
orders = auto
chirp_step = 0.0           # rad per harmonic step

[simulation]
events = 1000000
seed = 1
delay_count = 32
delay_periods = 2
smear_electron = 0.01      # a.u. per component
smear_ion = 0.3            # a.u. per component
ker_max = 1.5              # eV
threads = 1

[analysis]
ker_bin = 0.05
ee_bin = 0.1
half_width = 0.35
fit_ker_min = 0.0
fit_ker_max = 0.35
probe_ker = 0.6
subtract_mean = false
chirp = auto

[output]
directory = out
formats = csv, json, png, script
"""
