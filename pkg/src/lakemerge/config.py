"""INI-style pipeline configuration with strict validation.

Every key has a documented default; unknown sections or keys are rejected
by name so typos fail loudly. Command-line overrides use dotted
`section.key=value` form and go through the same validation. Secrets never
live here: API tokens come from environment variables only.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .resolve import DEMO_STRATEGIES, RESOLVERS

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "load_config",
]


class ConfigError(Exception):
    """A configuration file or override is invalid."""


def _parse_bool(raw: str) -> bool:
    s = raw.strip().lower()
    if s in ("true", "1", "yes", "on"):
        return True
    if s in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_opt_float(raw: str) -> float | None:
    s = raw.strip()
    return None if s == "" else float(s)


def _parse_words(raw: str) -> tuple[str, ...]:
    words = tuple(w.strip() for w in raw.split(",") if w.strip())
    if not words:
        raise ValueError("expected a comma-separated list with at least one entry")
    return words


def _choice(options: Sequence[str]) -> Callable[[str], str]:
    def parse(raw: str) -> str:
        s = raw.strip()
        if s not in options:
            raise ValueError(f"expected one of {sorted(options)}, got {raw!r}")
        return s

    return parse


# section -> key -> (default value, parser). The parser turns the raw
# config string into the stored value; defaults are stored as-is.
_SCHEMA: dict[str, dict[str, tuple[object, Callable[[str], object]]]] = {
    "run": {
        "seed": (0, int),
        "out_dir": ("run", str),
    },
    "bench": {
        "entities": (200, int),
        "tables": (3, int),
        "attrs_per_table": (6, int),
        "overlap": (3, int),
        "drop_prob": (0.2, float),
        "missing_prob": (0.15, float),
        "noise_rate": (0.30, float),
        "noise_mix": ("balanced", _choice(("se_heavy", "balanced", "te_heavy"))),
        "conflict_sources": (12, int),
        "conflicts_before_noise": (False, _parse_bool),
        "key_attrs": (("name",), _parse_words),
    },
    "embed": {
        "provider": ("builtin", _choice(("builtin", "http"))),
        "dimension": (128, int),
        "url": ("", str),
    },
    "train": {
        "n_pos": (6, int),
        "n_neg": (20, int),
        "epochs": (30, int),
        "learning_rate": (None, _parse_opt_float),
        "epsilon": (0.05, float),
        "adv_sign": ("ascent", _choice(("ascent", "paper"))),
        "optimizer": ("adam", _choice(("adam", "sgd"))),
        "hidden": (64, int),
    },
    "judge": {
        "planes_per_band": (4, int),
        "bands": (8, int),
        "threshold": (0.5, float),
        "combine": ("mean", _choice(("mean", "max"))),
    },
    "discover": {
        "method": ("louvain", _choice(("bk", "louvain", "labelprop"))),
        "max_component": (5000, int),
    },
    "resolve": {
        "resolver": ("iclcr", _choice(RESOLVERS)),
        "demo_strategy": ("weighted_knn", _choice(DEMO_STRATEGIES)),
        "k": (10, int),
        "beta": (0.1, float),
        "token_budget": (3000, int),
        "tnew": ("firstseen", _choice(("firstseen", "majority"))),
        "client": ("mock", _choice(("mock", "http"))),
        "llm_url": ("", str),
        "llm_model": ("", str),
    },
    "eval": {},
}


@dataclass(frozen=True)
class PipelineConfig:
    """Validated configuration: one dict of typed values per section."""

    run: dict
    bench: dict
    embed: dict
    train: dict
    judge: dict
    discover: dict
    resolve: dict
    eval: dict

    def section(self, name: str) -> dict:
        if name not in _SCHEMA:
            raise KeyError(name)
        return getattr(self, name)

    def echo(self) -> dict:
        """Report-friendly copy: every section, with paths left out so
        reports compare equal across working directories."""
        out = {}
        for name in _SCHEMA:
            values = dict(self.section(name))
            values.pop("out_dir", None)
            for k, v in values.items():
                if isinstance(v, tuple):
                    values[k] = list(v)
            out[name] = values
        return out


def _parse_override(spec: str) -> tuple[str, str, str]:
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} must look like section.key=value")
    dotted, value = spec.split("=", 1)
    if "." not in dotted:
        raise ConfigError(f"override {spec!r} must look like section.key=value")
    section, key = dotted.split(".", 1)
    return section.strip(), key.strip(), value


def load_config(
    path: str | Path | None = None, overrides: Sequence[str] = ()
) -> PipelineConfig:
    """Load configuration from an INI file plus dotted overrides.

    A missing `path` means all defaults. Unknown sections, unknown keys,
    and unparsable values raise ConfigError naming the offender; overrides
    are applied after the file and validated the same way.
    """
    raw: dict[str, dict[str, str]] = {s: {} for s in _SCHEMA}

    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(p.read_text(encoding="utf-8"), source=str(p))
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from None
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                raw[section][key] = value

    for spec in overrides:
        section, key, value = _parse_override(spec)
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}] in override {spec!r}")
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown config key {section}.{key} in override {spec!r}")
        raw[section][key] = value

    sections: dict[str, dict] = {}
    for section, keys in _SCHEMA.items():
        values = {}
        for key, (default, parse) in keys.items():
            if key in raw[section]:
                try:
                    values[key] = parse(raw[section][key])
                except ValueError as exc:
                    raise ConfigError(f"bad value for {section}.{key}: {exc}") from None
            else:
                values[key] = default
        sections[section] = values
    return PipelineConfig(**sections)
