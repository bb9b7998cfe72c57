"""Run configuration: defaults, JSON merging, validation, thread cap."""

from __future__ import annotations

import copy
import json
import os
from concurrent.futures import ThreadPoolExecutor

DEFAULTS = {
    "grid": {"nr": 512, "nphi": 512, "stencil": 16, "sources": 64, "top": 8},
    "bridge": {"nr": 128, "nphi": 128, "nt": 64},
    "check": {"nr": 160, "nphi": 160, "stencil": 16, "sources": 24, "top": 4},
    "quadrature": {"epsabs": 1e-9, "epsrel": 1e-7},
    "window": {"i_max": 32, "j_max": 8, "k_max": 32},
    "output": {"dir": "ghflat_out"},
    "gallery": {"r_cut": 8.0},
}


class ConfigError(ValueError):
    pass


def merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def validate(cfg: dict) -> dict:
    for sec in ("grid", "check"):
        g = cfg[sec]
        for key, least in (("nr", 2), ("nphi", 2), ("sources", 1), ("top", 1)):
            if not isinstance(g.get(key), int) or g[key] < least:
                raise ConfigError(f"{sec}.{key} must be an integer >= {least}")
        if g.get("stencil") not in (8, 16):
            raise ConfigError(f"{sec}.stencil must be 8 or 16")
    b = cfg["bridge"]
    for key in ("nr", "nphi", "nt"):
        if not isinstance(b.get(key), int) or b[key] < 1:
            raise ConfigError(f"bridge.{key} must be a positive integer")
    w = cfg["window"]
    for key in ("i_max", "j_max", "k_max"):
        if not isinstance(w.get(key), int) or w[key] < 1:
            raise ConfigError(f"window.{key} must be a positive integer")
    if w["j_max"] > w["k_max"]:
        raise ConfigError("window.j_max must not exceed window.k_max")
    for key in ("epsabs", "epsrel"):
        if not cfg["quadrature"][key] > 0:
            raise ConfigError(f"quadrature.{key} must be positive")
    return cfg


def load(path: str | None = None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = merge(cfg, user)
    if overrides:
        cfg = merge(cfg, overrides)
    return validate(cfg)


def max_workers() -> int:
    env = os.environ.get("GHFLAT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def parallel_map(fn, items):
    """Ordered map over a thread pool capped by GHFLAT_THREADS."""
    items = list(items)
    n = max_workers()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
