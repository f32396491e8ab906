"""Parsing and validation of flat INI-style experiment configs.

A config is a handful of sections with string keys.  Every key has a
declared default, unknown sections or keys are rejected, and the resolved
mapping (with all defaults filled in) is what gets echoed into the run
manifest, so a manifest alone is enough to rerun an experiment.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field


EXPERIMENTS = (
    "verify-sos",
    "quadrature-scan",
    "prepare",
    "gap-ratio",
    "aux-evolve",
    "aux-gaps",
    "bell-spectra",
    "blockenc-verify",
    "observables",
)


class ConfigError(Exception):
    """A config file is malformed or holds unknown/invalid entries."""


class UnknownExperimentError(ConfigError):
    """The experiment name is not in the registry."""


# Allowed keys per section with their defaults (as strings, the INI native
# type).  None means the key is required when its section is present.
_SCHEMA: dict[str, dict[str, str | None]] = {
    "experiment": {
        "name": None,
        "seed": "1234",
        "output_dir": "",
    },
    "hamiltonian": {
        "model": "tfim",
        "n": "2",
        "coupling": "1.0",
        "field": "0.1",
    },
    "sampler": {
        "family": "dll",
        "couplings": "X1,Z1,X2,Z2",
        "beta": "1.0",
        "betas": "",
        "q": "gaussian",
        "q_width": "32",
        "omega_points": "41",
    },
    "quadrature": {
        "eps": "0.1",
        "eps_list": "",
        "t": "",
        "n_points": "",
    },
    "filter": {
        "method": "polynomial",
        "eps_target": "1e-4",
        "degree": "",
    },
    "aux": {
        "dressed": "true",
        "times": "",
        "t_max": "20",
        "n_times": "41",
        "rho0": "computational",
        "q": "flat",
    },
}

_REQUIRED_SECTIONS = ("experiment",)


@dataclass
class ExperimentConfig:
    """Resolved config: every schema key present, defaults filled in."""

    sections: dict[str, dict[str, str]] = field(default_factory=dict)

    def get(self, section: str, key: str) -> str:
        return self.sections[section][key]

    def getfloat(self, section: str, key: str) -> float:
        try:
            return float(self.sections[section][key])
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not a number: "
                              f"{self.sections[section][key]!r}") from exc

    def getint(self, section: str, key: str) -> int:
        try:
            return int(self.sections[section][key])
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not an integer: "
                              f"{self.sections[section][key]!r}") from exc

    def getbool(self, section: str, key: str) -> bool:
        text = self.sections[section][key].strip().lower()
        if text in ("true", "yes", "on", "1"):
            return True
        if text in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"[{section}] {key}: not a boolean: {text!r}")

    def getlist(self, section: str, key: str) -> list[float]:
        text = self.sections[section][key].strip()
        if not text:
            return []
        try:
            return [float(tok) for tok in text.split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not a number list: "
                              f"{text!r}") from exc

    @property
    def name(self) -> str:
        return self.get("experiment", "name")

    @property
    def seed(self) -> int:
        return self.getint("experiment", "seed")

    def as_dict(self) -> dict:
        return {sec: dict(keys) for sec, keys in self.sections.items()}


def parse_config(path: str) -> ExperimentConfig:
    """Read an INI file, reject unknown entries, fill in every default."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        # configparser reports the offending line in the message
        raise ConfigError(f"parse error: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")

    for section in _REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")

    resolved: dict[str, dict[str, str]] = {}
    for section, keys in _SCHEMA.items():
        resolved[section] = {}
        for key, default in keys.items():
            if parser.has_section(section) and key in parser[section]:
                resolved[section][key] = parser[section][key].strip()
            elif default is None:
                raise ConfigError(f"missing required key {key!r} "
                                  f"in [{section}]")
            else:
                resolved[section][key] = default

    cfg = ExperimentConfig(sections=resolved)
    if cfg.name not in EXPERIMENTS:
        raise UnknownExperimentError(f"unknown experiment {cfg.name!r}; "
                                     f"known: {', '.join(EXPERIMENTS)}")
    return cfg
