"""Experiment configuration: a single JSON document with defaults for every field."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .constellation import KINDS, make_constellation
from .miengine import DEFAULT_CAP

__all__ = ["ConfigError", "ExperimentConfig", "DEFAULTS", "load_config", "SCHEMES"]

SCHEMES = ("gsvd_baseline", "pg_gsvd", "pg_gsvd_an", "theorem_oracle")
_MODE_SCHEMES = {
    "instantaneous": {"gsvd_baseline", "pg_gsvd", "theorem_oracle"},
    "statistical": {"pg_gsvd", "pg_gsvd_an", "theorem_oracle"},
}

DEFAULTS = {
    "dims": [4, 3, 2],
    "constellation": "QPSK",
    "M": None,
    "csi_mode": "instantaneous",
    "schemes": ["gsvd_baseline", "pg_gsvd"],
    "N_s": 2,
    "snr_grid_db": [-10, -5, 0, 5, 10, 15, 20, 25, 30, 35, 40],
    "optimizer": {"n_iter": 100, "eps": 1e-4, "restarts": 5, "mc_samples": 500},
    "seeds": [0],
    "correlation": {
        "mean_aoa": None,
        "angle_spread": math.pi / 2,
        "spacing": 0.5,
        "L": 1000,
        "rank": None,
    },
    "sigma": 1.0,
    "output": None,
    "record_timing": False,
}


class ConfigError(ValueError):
    """Invalid experiment configuration (reported with the offending field)."""


def _merge(defaults, given, path):
    out = copy.deepcopy(defaults)
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        where = f" in {path}" if path else ""
        raise ConfigError(f"unknown field(s){where}: {', '.join(unknown)}")
    for key, val in given.items():
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path + key}: expected an object")
            out[key] = _merge(defaults[key], val, f"{path}{key}.")
        else:
            out[key] = val
    return out


def _int(v, name, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{name}: must be >= {lo}, got {v}")
    return v


def _num(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name}: expected a finite number, got {v!r}")
    return float(v)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration. ``raw`` keeps the fully defaulted document."""

    raw: dict

    @classmethod
    def from_dict(cls, given: dict | None = None) -> "ExperimentConfig":
        if given is None:
            given = {}
        if not isinstance(given, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(DEFAULTS, given, "")
        cls._validate(cfg)
        return cls(cfg)

    @staticmethod
    def _validate(cfg):
        dims = cfg["dims"]
        if not isinstance(dims, list) or len(dims) != 3:
            raise ConfigError("dims: expected [N_t, N_r, N_e]")
        for name, v in zip(("dims[0] (N_t)", "dims[1] (N_r)", "dims[2] (N_e)"), dims):
            _int(v, name, 1)
        kind = cfg["constellation"]
        if not isinstance(kind, str) or kind.upper() not in KINDS:
            raise ConfigError(f"constellation: expected one of {KINDS}, got {kind!r}")
        try:
            c = make_constellation(kind, cfg["M"])
        except ValueError as exc:
            raise ConfigError(f"constellation/M: {exc}") from None
        mode = cfg["csi_mode"]
        if mode not in _MODE_SCHEMES:
            raise ConfigError(f"csi_mode: expected 'instantaneous' or 'statistical', got {mode!r}")
        schemes = cfg["schemes"]
        if not isinstance(schemes, list) or not schemes:
            raise ConfigError("schemes: expected a nonempty list")
        for s in schemes:
            if s not in SCHEMES:
                raise ConfigError(f"schemes: unknown scheme {s!r}; expected one of {SCHEMES}")
            if s not in _MODE_SCHEMES[mode]:
                raise ConfigError(f"schemes: {s!r} is not available in {mode} mode")
        if len(set(schemes)) != len(schemes):
            raise ConfigError("schemes: duplicates")
        n_s = _int(cfg["N_s"], "N_s", 1)
        if n_s > dims[0]:
            raise ConfigError(f"N_s: must not exceed N_t={dims[0]}, got {n_s}")
        if n_s > DEFAULT_CAP:
            raise ConfigError(
                f"N_s: {n_s} exceeds the joint-enumeration cap {DEFAULT_CAP} "
                f"(cost M^(2 N_s) = {c.M ** (2 * n_s):.3e})"
            )
        grid = cfg["snr_grid_db"]
        if not isinstance(grid, list) or not grid:
            raise ConfigError("snr_grid_db: expected a nonempty list")
        for i, v in enumerate(grid):
            _num(v, f"snr_grid_db[{i}]")
        opt = cfg["optimizer"]
        _int(opt["n_iter"], "optimizer.n_iter", 0)
        if _num(opt["eps"], "optimizer.eps") < 0:
            raise ConfigError("optimizer.eps: must be nonnegative")
        _int(opt["restarts"], "optimizer.restarts", 1)
        _int(opt["mc_samples"], "optimizer.mc_samples", 2)
        seeds = cfg["seeds"]
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("seeds: expected a nonempty list")
        for i, s in enumerate(seeds):
            _int(s, f"seeds[{i}]", 0)
        corr = cfg["correlation"]
        if corr["mean_aoa"] is not None:
            _num(corr["mean_aoa"], "correlation.mean_aoa")
        if _num(corr["angle_spread"], "correlation.angle_spread") <= 0:
            raise ConfigError("correlation.angle_spread: must be positive")
        _num(corr["spacing"], "correlation.spacing")
        _int(corr["L"], "correlation.L", 1)
        if corr["rank"] is not None:
            _int(corr["rank"], "correlation.rank", 1)
            if corr["rank"] > dims[0]:
                raise ConfigError("correlation.rank: must not exceed N_t")
        if _num(cfg["sigma"], "sigma") <= 0:
            raise ConfigError("sigma: must be positive")
        if cfg["output"] is not None and not isinstance(cfg["output"], str):
            raise ConfigError("output: expected a path string or null")
        if not isinstance(cfg["record_timing"], bool):
            raise ConfigError("record_timing: expected true or false")

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def n_t(self):
        return self.raw["dims"][0]

    @property
    def n_r(self):
        return self.raw["dims"][1]

    @property
    def n_e(self):
        return self.raw["dims"][2]

    def constellation(self):
        return make_constellation(self.raw["constellation"], self.raw["M"])


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return ExperimentConfig.from_dict(data)
