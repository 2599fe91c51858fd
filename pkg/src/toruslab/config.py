"""Experiment configuration: JSON loading, defaults, and strict validation.

A config is a flat JSON object.  Unknown keys are rejected so that typos in
tolerance names fail loudly instead of silently running with defaults.
Complex scalars are written as two-element [re, im] arrays (a bare number is
accepted and read as a real).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Optional

from .errors import ConfigInvalid

_FAMILIES = ("elliptic", "jumping", "siegel-diagonal")
_BACKENDS = ("grid", "spectral")

# Effective tolerance defaults; every report echoes the merged set.
DEFAULT_TOLERANCES: Dict[str, float] = {
    "identity": 1e-10,
    "hodge_decomposition": 1e-9,
    "minimal_solution": 1e-8,
    "admissibility": 1e-5,
    "representative": 1e-6,
    "routes_rel": 1e-5,
    "fd_rel": 1e-3,
    "nakano": 1e-6,
    "sff_psd": 1e-10,
    "lift_independence": 1e-5,
    "sff_routes": 1e-6,
    "primitivity": 1e-8,
    "hr_equality": 1e-7,
    "rank_tol": 1e-7,
}

_SCAN_KEYS = {"center", "direction", "radius", "samples"}
_BLS_KEYS = {"instances", "step", "t"}

_TOP_KEYS = {
    "family", "t", "tau", "d", "chi", "backend", "N", "M", "order",
    "step", "seed", "threads", "tolerances", "scan", "bls",
}


def _as_complex(value, key: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, (list, tuple)) and len(value) == 2
            and all(isinstance(x, (int, float)) for x in value)):
        return complex(value[0], value[1])
    raise ConfigInvalid(f"{key!r} must be a number or a [re, im] pair, got {value!r}")


def _as_int(value, key: str, minimum: int = 1) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigInvalid(f"{key!r} must be an integer >= {minimum}, got {value!r}")
    return value


def _as_pos_float(value, key: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise ConfigInvalid(f"{key!r} must be a positive number, got {value!r}")
    return float(value)


@dataclass
class ExperimentConfig:
    family: str = "elliptic"
    t: complex = 0.3 + 1.1j
    tau: complex = 1.0 + 0.0j
    d: int = 1                       # bundle degree; 0 means flat with characters chi
    chi: tuple = ()
    backend: str = "grid"
    N: int = 64                      # grid points per real direction
    M: int = 8                       # spectral mode cut |k| <= M
    order: int = 10                  # grid stencil order
    step: float = 1e-3               # base finite-difference step
    seed: int = 0
    threads: int = 1
    tolerances: Dict[str, float] = field(default_factory=dict)
    scan: Dict[str, object] = field(default_factory=dict)
    bls: Dict[str, object] = field(default_factory=dict)

    def tol(self, name: str) -> float:
        return self.tolerances[name]

    def scan_samples(self):
        center = self.scan.get("center", 1j)
        direction = self.scan.get("direction", 1.0 + 0.0j)
        radius = self.scan.get("radius", 0.05)
        samples = self.scan.get("samples", 101)
        return [center + direction * radius * (2.0 * i / (samples - 1) - 1.0)
                for i in range(samples)]

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "t": [self.t.real, self.t.imag],
            "tau": [self.tau.real, self.tau.imag],
            "d": self.d,
            "chi": list(self.chi),
            "backend": self.backend,
            "N": self.N,
            "M": self.M,
            "order": self.order,
            "step": self.step,
            "seed": self.seed,
            "threads": self.threads,
            "tolerances": dict(sorted(self.tolerances.items())),
            "scan": {k: ([v.real, v.imag] if isinstance(v, complex) else v)
                     for k, v in sorted(self.scan.items())},
            "bls": dict(sorted(self.bls.items())),
        }


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"config root must be an object, got {type(raw).__name__}")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")

    cfg = ExperimentConfig()
    if "family" in raw:
        if raw["family"] not in _FAMILIES:
            raise ConfigInvalid(f"family must be one of {_FAMILIES}, got {raw['family']!r}")
        cfg.family = raw["family"]
    if "t" in raw:
        cfg.t = _as_complex(raw["t"], "t")
    if "tau" in raw:
        cfg.tau = _as_complex(raw["tau"], "tau")
    if "d" in raw:
        cfg.d = _as_int(raw["d"], "d", minimum=0)
    if "chi" in raw:
        if not isinstance(raw["chi"], (list, tuple)):
            raise ConfigInvalid("'chi' must be a list of real characters")
        cfg.chi = tuple(float(x) for x in raw["chi"])
    if "backend" in raw:
        if raw["backend"] not in _BACKENDS:
            raise ConfigInvalid(f"backend must be one of {_BACKENDS}, got {raw['backend']!r}")
        cfg.backend = raw["backend"]
    for key in ("N", "M", "order", "threads"):
        if key in raw:
            setattr(cfg, key, _as_int(raw[key], key))
    if "seed" in raw:
        cfg.seed = _as_int(raw["seed"], "seed", minimum=0)
    if "step" in raw:
        cfg.step = _as_pos_float(raw["step"], "step")

    tols = dict(DEFAULT_TOLERANCES)
    if "tolerances" in raw:
        if not isinstance(raw["tolerances"], dict):
            raise ConfigInvalid("'tolerances' must be an object")
        unknown = set(raw["tolerances"]) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigInvalid(f"unknown tolerance keys: {sorted(unknown)}")
        for k, v in raw["tolerances"].items():
            tols[k] = _as_pos_float(v, f"tolerances.{k}")
    cfg.tolerances = tols

    if "scan" in raw:
        if not isinstance(raw["scan"], dict):
            raise ConfigInvalid("'scan' must be an object")
        unknown = set(raw["scan"]) - _SCAN_KEYS
        if unknown:
            raise ConfigInvalid(f"unknown scan keys: {sorted(unknown)}")
        scan = dict(raw["scan"])
        for k in ("center", "direction"):
            if k in scan:
                scan[k] = _as_complex(scan[k], f"scan.{k}")
        if "radius" in scan:
            scan["radius"] = _as_pos_float(scan["radius"], "scan.radius")
        if "samples" in scan:
            scan["samples"] = _as_int(scan["samples"], "scan.samples", minimum=2)
        cfg.scan = scan

    if "bls" in raw:
        if not isinstance(raw["bls"], dict):
            raise ConfigInvalid("'bls' must be an object")
        unknown = set(raw["bls"]) - _BLS_KEYS
        if unknown:
            raise ConfigInvalid(f"unknown bls keys: {sorted(unknown)}")
        bls = dict(raw["bls"])
        if "instances" in bls:
            bls["instances"] = _as_int(bls["instances"], "bls.instances")
        if "step" in bls:
            bls["step"] = _as_pos_float(bls["step"], "bls.step")
        if "t" in bls:
            bls["t"] = _as_complex(bls["t"], "bls.t")
        cfg.bls = bls

    return cfg


def load_config(path: Optional[str]) -> ExperimentConfig:
    """Read a JSON config file; None gives the documented defaults."""
    if path is None:
        return config_from_dict({})
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config {path!r} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)
