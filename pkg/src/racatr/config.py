"""Run configuration: INI-style sections of ``key = value`` entries.

Sections ``[layout]`` and ``[feed]`` are required; ``[synthesis]``,
``[element]`` and ``[run]`` fall back to defaults. Unknown sections and
keys are rejected with the line they appear on.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .element import ElementPhaseModel, linear_model, read_phase_csv
from .feedmodel import FeedParams, solve_q_for_edge_taper
from .layout import LayoutParams
from .synth import SynthesisConfig

DEFAULT_TAPER_DB = -20.0
DEFAULT_FREQUENCIES = (26.5e9, 28e9, 29.5e9)
BUILTIN_ELEMENT = "builtin-linear"


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


def parse_frequency(text: str) -> float:
    """``28e9``, ``28GHz`` or ``28 ghz`` -> hertz."""
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*([a-zA-Z]*)\s*", text)
    if not m or m.group(2).lower() not in ("", *_FREQ_UNITS):
        raise ValueError(f"bad frequency {text!r}")
    value = float(m.group(1)) * _FREQ_UNITS.get(m.group(2).lower(), 1.0)
    if not value > 0:
        raise ValueError(f"frequency must be positive, got {text!r}")
    return value


def parse_frequencies(text: str) -> tuple[float, ...]:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise ValueError("empty frequency list")
    return tuple(parse_frequency(t) for t in items)


_LAYOUT_KEYS = {f.name: float for f in fields(LayoutParams)}
_FEED_KEYS = {"q": float, "taper_db": float, "position_x": float, "position_y": float, "position_z": float}
_SYNTH_KEYS = {
    "max_iterations": int, "qz_center_x": float, "qz_center_y": float, "qz_size": float,
    "target_amp_ripple": float, "target_phase_ripple": float, "stop_on_target": _bool,
    "record_history_every": int, "projection_amp_ripple": float, "projection_phase_ripple": float,
    "rotated": _bool, "grid_margin": float,
}
_ELEMENT_KEYS = {"curves": str}
_RUN_KEYS = {"frequencies": parse_frequencies, "output_dir": str, "seed": int, "trials": int, "workers": int}
SCHEMA = {"layout": _LAYOUT_KEYS, "feed": _FEED_KEYS, "synthesis": _SYNTH_KEYS,
          "element": _ELEMENT_KEYS, "run": _RUN_KEYS}
REQUIRED_SECTIONS = ("layout", "feed")


@dataclass(frozen=True)
class RunConfig:
    layout: LayoutParams = field(default_factory=LayoutParams)
    q: float | None = None
    taper_db: float | None = DEFAULT_TAPER_DB
    feed_position: tuple[float, float, float] | None = None
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    element: str = BUILTIN_ELEMENT
    frequencies: tuple[float, ...] = DEFAULT_FREQUENCIES
    output_dir: Path = Path("racatr_out")
    seed: int = 0
    trials: int = 10
    workers: int = 1
    source: Path | None = None

    def __post_init__(self):
        if (self.q is None) == (self.taper_db is None):
            raise ConfigError("[feed] needs exactly one of q or taper_db")
        if self.q is not None and self.q < 0:
            raise ConfigError("[feed] q must be non-negative")
        if self.taper_db is not None and self.taper_db > 0:
            raise ConfigError("[feed] taper_db must not be positive")
        if self.trials < 1 or self.workers < 1:
            raise ConfigError("[run] trials and workers must be at least 1")

    def pattern_exponent(self) -> float:
        if self.q is not None:
            return self.q
        return solve_q_for_edge_taper(self.layout, self.taper_db, self.synthesis.rotated)

    def feed(self, frequency: float | None = None) -> FeedParams:
        f = self.layout.design_frequency if frequency is None else frequency
        position = self.layout.feed_position if self.feed_position is None else self.feed_position
        return FeedParams(position, f, self.pattern_exponent())

    def element_model(self) -> ElementPhaseModel:
        if self.element == BUILTIN_ELEMENT:
            return linear_model()
        return read_phase_csv(self.element)


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines, section = {}, None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, ""), n)
        elif section and line and line[0] not in "#;" and ("=" in line or ":" in line):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            lines.setdefault((section, key), n)
    return lines


def parse_config(text: str, source: str | Path = "<config>") -> RunConfig:
    """Parse config text; relative element paths resolve against ``source``'s directory."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       default_section="__defaults__")
    try:
        parser.read_string(text, source=str(source))
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        what = f"key {exc.option!r}" if hasattr(exc, "option") else "section"
        raise ConfigError(f"{source}:{exc.lineno}: duplicate {what} in [{exc.section}]") from None
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc.message}") from None
    lines = _key_lines(text)

    def where(section, key=""):
        return f"{source}:{lines.get((section, key), '?')}"

    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{where(section)}: unknown section [{section}]")
    for section in REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ConfigError(f"{source}: missing required section [{section}]")

    values: dict[str, dict] = {}
    for section in parser.sections():
        schema = SCHEMA[section]
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"{where(section, key)}: unknown key {key!r} in [{section}]")
            try:
                values[section][key] = schema[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{where(section, key)}: bad value for {key}: {exc}") from None

    try:
        layout = LayoutParams(**values["layout"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where('layout')}: {exc}") from None

    feed = values["feed"]
    pos_keys = ("position_x", "position_y", "position_z")
    given = [k in feed for k in pos_keys]
    if any(given) and not all(given):
        raise ConfigError(f"{where('feed')}: give all of position_x, position_y, position_z or none")
    position = tuple(feed[k] for k in pos_keys) if all(given) else None
    if "q" in feed and "taper_db" in feed:
        raise ConfigError(f"{where('feed', 'taper_db')}: give q or taper_db, not both")
    q = feed.get("q")
    taper = feed.get("taper_db", DEFAULT_TAPER_DB if q is None else None)

    syn = dict(values.get("synthesis", {}))
    cx, cy = syn.pop("qz_center_x", None), syn.pop("qz_center_y", None)
    if (cx is None) != (cy is None):
        raise ConfigError(f"{where('synthesis')}: give both qz_center_x and qz_center_y or neither")
    if cx is not None:
        syn["qz_center"] = (cx, cy)
    try:
        synthesis = SynthesisConfig(**syn)
    except ValueError as exc:
        raise ConfigError(f"{where('synthesis')}: {exc}") from None

    element = values.get("element", {}).get("curves", BUILTIN_ELEMENT)
    if element != BUILTIN_ELEMENT:
        path = Path(element)
        if not path.is_absolute() and source != "<config>":
            path = Path(source).parent / path
        if not path.is_file():
            raise ConfigError(f"{where('element', 'curves')}: phase-curve file not found: {path}")
        element = str(path)

    run = values.get("run", {})
    kwargs = {k: run[k] for k in ("frequencies", "seed", "trials", "workers") if k in run}
    if "output_dir" in run:
        kwargs["output_dir"] = Path(run["output_dir"])
    try:
        return RunConfig(layout=layout, q=q, taper_db=taper, feed_position=position, synthesis=synthesis,
                         element=element, source=Path(source) if source != "<config>" else None, **kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``table2.cfg``, ``experiment.cfg``)."""
    path = Path(__file__).parent / "data" / name
    if not path.is_file():
        raise FileNotFoundError(path)
    return path
