"""Scenario configuration: TOML files, built-in presets and key-path overrides.

A config is a nested table.  The top level holds ``scenario``, ``seed`` and
``out``; module parameters live in ``[network]``, ``[montecarlo]``,
``[analytic]``, ``[formation]`` and ``[tracking]``.  Every key is checked
against the schema below, so a misspelt key is an error naming the full
key path rather than something silently ignored.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .analytic import NetworkParams
from .channel import FadingParams
from .errors import ConfigError
from .formation import FormationScenario
from .geometry import HeightLaw
from .montecarlo import ALL_SCHEMES, McConfig, scheme_size
from .tracking import TrackingScenario, tracking_case_study

SCENARIOS = ("formation", "tracking", "coverage", "rate", "compare", "pdfcheck", "fig7")
FIGURE_ALIASES = {
    "fig4": "formation",
    "fig5": "tracking",
    "fig6": "pdfcheck",
    "fig7": "fig7",
    "fig8": "compare",
}

# Schema: section -> key -> default.  None means "optional, no value".
SCHEMA: dict[str, Any] = {
    "scenario": "fig7",
    "seed": 2024,
    "out": "results",
    "network": {
        "density_per_km2": 16.0,
        "alpha": 2.8,
        "m": 2.0,
        "omega": 1.0,
        "h_min": 50.0,
        "h_max": 300.0,
        "outer_radius": None,
    },
    "montecarlo": {
        "trials": 100_000,
        "region_radius": 3000.0,
        "edge_factor": 1.2,
        "threads": 1,
        "gamma_db": [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
        "alphas": [2.4, 2.8],
        "densities_per_km2": [16.0],
        "schemes": list(ALL_SCHEMES),
        "conventional_metric": "rx_power",
        "pdf_bins": 60,
    },
    "analytic": {
        "model": "conditional",
        "rate_form": "integral",
    },
    "formation": {
        "density_per_km2": 16.0,
        "region_radius": 3000.0,
        "takeoff_radius": 200.0,
        "takeoff_speed": 5.0,
        "t_end": 500.0,
        "dt": 0.01,
        "noise": 0.0,
        "speed_cap": 20.0,
        "schedule": [[0.0, 0.002], [100.0, 0.02], [200.0, 0.1]],
        "stride": 100,
    },
    "tracking": {
        "ue_speed": 10.0,
        "turn_times": [20.0, 25.0],
        "headings_deg": [0.0, 90.0, 0.0],
        "t_end": 30.0,
        "dt": 0.01,
        "tau": 0.02,
        "q0_radius": 10.0,
        "q0_mode": "ue_distance",
        "delta_max": 5.0,
        "rho": 1.3,
        "gain": 0.002,
        "stride": 1,
    },
}

PRESETS: dict[str, dict[str, Any]] = {
    "formation": {"scenario": "formation"},
    "tracking": {"scenario": "tracking"},
    "pdfcheck": {"scenario": "pdfcheck", "montecarlo": {"alphas": [2.8]}},
    "coverage": {"scenario": "coverage"},
    "rate": {
        "scenario": "rate",
        "montecarlo": {"alphas": [2.4, 2.6, 2.8, 3.0, 3.2], "densities_per_km2": [8.0, 16.0, 32.0]},
    },
    "fig7": {
        "scenario": "fig7",
        "montecarlo": {"alphas": [2.4, 2.6, 2.8, 3.0, 3.2], "densities_per_km2": [8.0, 16.0, 32.0]},
    },
    "compare": {"scenario": "compare", "montecarlo": {"alphas": [2.0, 3.0]}},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        key = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key '{key}'")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config key '{key}' must be a table")
            out[k] = _merge(base[k], v, key + ".")
        else:
            if isinstance(v, dict):
                raise ConfigError(f"config key '{key}' is not a table")
            out[k] = v
    return out


def parse_value(text: str):
    """Parse an override value as a TOML literal, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value`` to a resolved config (pure key-path substitution)."""
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' must look like key.path=value")
    path, text = assignment.split("=", 1)
    keys = [k.strip() for k in path.strip().split(".") if k.strip()]
    if not keys:
        raise ConfigError(f"override '{assignment}' has an empty key")
    nested: dict = parse_value(text.strip())
    for k in reversed(keys):
        nested = {k: nested}
    return _merge(cfg, nested)


def load_config(source: str | Path | None = None, overrides=()) -> dict:
    """Resolve a preset name or TOML path, then apply overrides and validate."""
    cfg = copy.deepcopy(SCHEMA)
    if source is not None:
        name = str(source)
        name = FIGURE_ALIASES.get(name, name)
        if name in PRESETS:
            cfg = _merge(cfg, PRESETS[name])
        else:
            p = Path(source)
            if not p.is_file():
                raise ConfigError(f"'{source}' is neither a known scenario {sorted(PRESETS)} nor a config file")
            try:
                data = tomllib.loads(p.read_text(encoding="utf-8"))
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"cannot parse {p}: {exc}") from None
            scen = data.get("scenario")
            scen = FIGURE_ALIASES.get(scen, scen)
            if scen in PRESETS:
                cfg = _merge(cfg, PRESETS[scen])
            cfg = _merge(cfg, data)
    for ov in overrides:
        cfg = apply_override(cfg, ov)
    cfg["scenario"] = FIGURE_ALIASES.get(cfg["scenario"], cfg["scenario"])
    validate(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Typed views


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    seed: int
    out: Path
    raw: dict


def _typed(fn, key):
    try:
        return fn()
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def network_params(cfg: dict, *, alpha=None, density_per_km2=None) -> NetworkParams:
    n = cfg["network"]
    return _typed(
        lambda: NetworkParams(
            density=float(density_per_km2 if density_per_km2 is not None else n["density_per_km2"]) * 1e-6,
            alpha=float(alpha if alpha is not None else n["alpha"]),
            fading=FadingParams(float(n["m"]), float(n["omega"])),
            height_law=HeightLaw("uniform", float(n["h_min"]), float(n["h_max"])),
            outer_radius=None if n["outer_radius"] is None else float(n["outer_radius"]),
        ),
        "network",
    )


def mc_config(cfg: dict, *, alpha=None, density_per_km2=None, scheme=None) -> McConfig:
    m = cfg["montecarlo"]
    return _typed(
        lambda: McConfig(
            trials=int(m["trials"]),
            master_seed=int(cfg["seed"]),
            network=network_params(cfg, alpha=alpha, density_per_km2=density_per_km2),
            region_radius=float(m["region_radius"]),
            scheme=scheme or m["schemes"][0],
            gamma_db=tuple(float(g) for g in m["gamma_db"]),
            edge_factor=float(m["edge_factor"]),
            conventional_metric=m["conventional_metric"],
            threads=int(m["threads"]),
        ),
        "montecarlo",
    )


def formation_scenario(cfg: dict) -> FormationScenario:
    f = cfg["formation"]
    return _typed(
        lambda: FormationScenario(
            seed=int(cfg["seed"]),
            density=float(f["density_per_km2"]) * 1e-6,
            region_radius=float(f["region_radius"]),
            takeoff_radius=float(f["takeoff_radius"]),
            takeoff_speed=float(f["takeoff_speed"]),
            t_end=float(f["t_end"]),
            dt=float(f["dt"]),
            noise=float(f["noise"]),
            speed_cap=None if f["speed_cap"] is None else float(f["speed_cap"]),
            schedule=tuple((float(t), float(c)) for t, c in f["schedule"]),
        ),
        "formation",
    )


def tracking_scenario(cfg: dict) -> TrackingScenario:
    t = cfg["tracking"]
    return _typed(
        lambda: TrackingScenario(
            seed=int(cfg["seed"]),
            ue_speed=float(t["ue_speed"]),
            turn_times=tuple(float(x) for x in t["turn_times"]),
            headings_deg=tuple(float(x) for x in t["headings_deg"]),
            t_end=float(t["t_end"]),
            dt=float(t["dt"]),
            tau=float(t["tau"]),
            q0_radius=float(t["q0_radius"]),
            q0_mode=str(t["q0_mode"]),
            delta_max=float(t["delta_max"]),
            rho=float(t["rho"]),
            gain=float(t["gain"]),
        ),
        "tracking",
    )


def validate(cfg: dict) -> None:
    """Check cross-field constraints; raises ConfigError naming the key."""
    if cfg["scenario"] not in SCENARIOS:
        raise ConfigError(f"scenario: unknown kind {cfg['scenario']!r}; expected one of {SCENARIOS} or {sorted(FIGURE_ALIASES)}")
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("seed: must be an integer in [0, 2^64)")
    m = cfg["montecarlo"]
    for s in m["schemes"]:
        _typed(lambda: scheme_size(s), "montecarlo.schemes")
    if not m["schemes"]:
        raise ConfigError("montecarlo.schemes: must not be empty")
    for key in ("alphas", "densities_per_km2", "gamma_db"):
        if not isinstance(m[key], list) or not m[key]:
            raise ConfigError(f"montecarlo.{key}: must be a non-empty list")
    if any(float(a) < 2 for a in m["alphas"]):
        raise ConfigError("montecarlo.alphas: path-loss exponents must be >= 2")
    if any(not float(d) > 0 for d in m["densities_per_km2"]):
        raise ConfigError("montecarlo.densities_per_km2: densities must be positive")
    if int(m["pdf_bins"]) < 1:
        raise ConfigError("montecarlo.pdf_bins: must be >= 1")
    if cfg["analytic"]["model"] not in ("conditional", "unconditional"):
        raise ConfigError("analytic.model: must be 'conditional' or 'unconditional'")
    if cfg["analytic"]["rate_form"] not in ("integral", "pcf"):
        raise ConfigError("analytic.rate_form: must be 'integral' or 'pcf'")
    if int(cfg["formation"]["stride"]) < 1 or int(cfg["tracking"]["stride"]) < 1:
        raise ConfigError("stride: must be >= 1")
    # typed constructions run the per-module invariants
    network_params(cfg)
    mc_config(cfg)
    formation_scenario(cfg)
    # building the tracking case runs the impulse, target and swarm checks
    _typed(lambda: tracking_case_study(tracking_scenario(cfg)), "tracking")


def scenario_config(cfg: dict) -> ScenarioConfig:
    return ScenarioConfig(cfg["scenario"], int(cfg["seed"]), Path(cfg["out"]), cfg)
