"""CLI configuration: defaults, file/flag merging, and validation.

The resolved config is a plain nested dict. Every leaf can come from
(in increasing precedence) the built-in defaults, a JSON config file,
and repeated ``--set key.path=value`` flags. Validation errors always
name the offending key path.
"""

from __future__ import annotations

import copy
import json

from .channel import RadioConfig
from .errors import ConfigError
from .experiments import CodebookSpec, ExperimentSeeds, ExperimentSpec, SetupSpec
from .predictor import ModelSpec, TrainConfig
from .scenario import MobilityConfig, WorldConfig
from .selectors import OverheadModel

DEFAULTS: dict = {
    "global_seed": 1,
    "world": {
        "extent": [400.0, 400.0],
        "bs_height": 15.0,
        "bs_rows": 8,
        "bs_cols": 8,
        "blockers_per_quadrant": 6,
        "blocker_size": [20.0, 60.0],
        "blocker_height": [5.0, 18.0],
        "scatterers_per_quadrant": 40,
        "scatterer_height": [0.5, 20.0],
        "axis_margin": 5.0,
    },
    "radio": {
        "tx_power_dbm": 20.0,
        "noise_figure_db": 10.0,
        "noise_psd_dbm_hz": -174.0,
    },
    "link": {
        "carrier_hz": 15e9,
        "subcarriers": 24,
        "subcarrier_spacing_hz": 30e3,
        "reflection_coeff": 0.3,
        "max_paths": 16,
    },
    "overhead": {
        "symbols_per_measurement": 1,
        "frame_symbols": 560,
    },
    "mobility": {
        "n_vehicles": 60,
        "duration_s": 400,
        "car_fraction": 0.3,
        "car_speed": [12.5, 13.5],
        "bus_speed": [7.75, 8.25],
    },
    "model": {
        "hidden_width": 64,
        "residual_blocks": 3,
        "init_scheme": "glorot",
    },
    "training": {
        "epochs": 200,
        "batch_size": 256,
        "learning_rate": 1e-3,
        "weight_decay": 1e-5,
        "validation_fraction": 0.1,
        "patience": 20,
    },
    "experiment": {
        "protocol": "antenna",
        "n_train_snapshots": 4000,
        "n_eval_snapshots": 2000,
        "antenna_train_size": [4, 4],
        "antenna_test_size": [8, 8],
        "codebook_array_size": [4, 4],
        "codebook_subset_count": 16,
        "codebook_oversampling": 4,
        "codebook_train_seed": 101,
        "codebook_test_seed": 202,
        "location_array_size": [8, 8],
        "location_train_quadrants": ["UR"],
        "location_test_quadrants": ["UL", "LL", "LR"],
    },
    "seeds": {},  # optional explicit overrides of the derived seeds
}


def _merge_into(base: dict, overlay: dict, path: str = "") -> None:
    for key, value in overlay.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"{here}: unknown configuration key")
        if isinstance(base[key], dict) and key != "seeds":
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected an object")
            _merge_into(base[key], value, here)
        else:
            base[key] = value


def load_config(config_path=None, set_overrides=(), global_seed=None) -> dict:
    """Defaults, then the config file, then --set flags; validated."""
    cfg = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config file: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file: top level must be an object")
        _merge_into(cfg, file_cfg)
    for item in set_overrides:
        apply_set(cfg, item)
    if global_seed is not None:
        cfg["global_seed"] = int(global_seed)
    validate_config(cfg)
    return cfg


def apply_set(cfg: dict, item: str) -> None:
    """Apply one ``key.path=value`` override; values parse as JSON first."""
    if "=" not in item:
        raise ConfigError(f"--set needs key=value, got {item!r}")
    key_path, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key_path.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"{key_path}: unknown configuration key")
        node = node[part]
    leaf = parts[-1]
    if not isinstance(node, dict) or (leaf not in node and parts[0] != "seeds"):
        raise ConfigError(f"{key_path}: unknown configuration key")
    node[leaf] = value


def _require(cond: bool, key: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{key}: {message}")


def validate_config(cfg: dict) -> None:
    w = cfg["world"]
    _require(
        isinstance(w["extent"], (list, tuple)) and len(w["extent"]) == 2
        and all(isinstance(v, (int, float)) and v > 0 for v in w["extent"]),
        "world.extent", "must be two positive numbers",
    )
    _require(w["bs_height"] > 0, "world.bs_height", "must be positive")
    _require(w["bs_rows"] >= 1 and w["bs_cols"] >= 1, "world.bs_rows", "array size must be >= 1")
    _require(w["blockers_per_quadrant"] >= 0, "world.blockers_per_quadrant", "must be >= 0")
    _require(w["scatterers_per_quadrant"] >= 0, "world.scatterers_per_quadrant", "must be >= 0")
    r = cfg["radio"]
    _require(r["noise_figure_db"] >= 0, "radio.noise_figure_db", "must be >= 0")
    link = cfg["link"]
    _require(link["carrier_hz"] > 0, "link.carrier_hz", "must be positive")
    _require(link["subcarriers"] >= 1, "link.subcarriers", "must be >= 1")
    _require(link["subcarrier_spacing_hz"] > 0, "link.subcarrier_spacing_hz", "must be positive")
    _require(0 <= link["reflection_coeff"] <= 1, "link.reflection_coeff", "must lie in [0, 1]")
    ovh = cfg["overhead"]
    _require(ovh["frame_symbols"] > 0, "overhead.frame_symbols", "must be positive")
    mob = cfg["mobility"]
    _require(mob["n_vehicles"] >= 1, "mobility.n_vehicles", "must be >= 1")
    _require(mob["duration_s"] >= 1, "mobility.duration_s", "must be >= 1")
    _require(0 <= mob["car_fraction"] <= 1, "mobility.car_fraction", "must lie in [0, 1]")
    tr = cfg["training"]
    _require(tr["epochs"] >= 1, "training.epochs", "must be >= 1")
    _require(0 < tr["validation_fraction"] < 1, "training.validation_fraction", "must lie in (0, 1)")
    exp = cfg["experiment"]
    _require(
        exp["protocol"] in ("antenna", "codebook", "location"),
        "experiment.protocol", "must be one of antenna, codebook, location",
    )
    _require(exp["n_train_snapshots"] >= 1, "experiment.n_train_snapshots", "must be >= 1")
    _require(exp["n_eval_snapshots"] >= 1, "experiment.n_eval_snapshots", "must be >= 1")


def world_config(cfg: dict) -> WorldConfig:
    w = cfg["world"]
    return WorldConfig(
        extent=tuple(w["extent"]),
        bs_height=w["bs_height"],
        bs_rows=w["bs_rows"],
        bs_cols=w["bs_cols"],
        carrier_hz=cfg["link"]["carrier_hz"],
        blockers_per_quadrant=w["blockers_per_quadrant"],
        blocker_size=tuple(w["blocker_size"]),
        blocker_height=tuple(w["blocker_height"]),
        scatterers_per_quadrant=w["scatterers_per_quadrant"],
        scatterer_height=tuple(w["scatterer_height"]),
        axis_margin=w["axis_margin"],
    )


def radio_config(cfg: dict) -> RadioConfig:
    return RadioConfig(**cfg["radio"])


def overhead_model(cfg: dict) -> OverheadModel:
    return OverheadModel(**cfg["overhead"])


def mobility_config(cfg: dict) -> MobilityConfig:
    m = cfg["mobility"]
    return MobilityConfig(
        n_vehicles=m["n_vehicles"],
        duration_s=m["duration_s"],
        car_fraction=m["car_fraction"],
        car_speed=tuple(m["car_speed"]),
        bus_speed=tuple(m["bus_speed"]),
    )


def channel_kwargs(cfg: dict) -> dict:
    link = cfg["link"]
    return {
        "subcarriers": link["subcarriers"],
        "subcarrier_spacing_hz": link["subcarrier_spacing_hz"],
        "reflection_coeff": link["reflection_coeff"],
        "max_paths": link["max_paths"],
    }


def model_spec(cfg: dict, seed: int = 0) -> ModelSpec:
    m = cfg["model"]
    return ModelSpec(
        hidden_width=m["hidden_width"],
        residual_blocks=m["residual_blocks"],
        init_scheme=m["init_scheme"],
        seed=seed,
    )


def train_config(cfg: dict, seed: int = 0) -> TrainConfig:
    t = cfg["training"]
    return TrainConfig(
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        learning_rate=t["learning_rate"],
        weight_decay=t["weight_decay"],
        validation_fraction=t["validation_fraction"],
        patience=t["patience"],
        seed=seed,
    )


def experiment_seeds(cfg: dict) -> ExperimentSeeds:
    derived = ExperimentSeeds.from_global(cfg["global_seed"])
    overrides = cfg.get("seeds") or {}
    known = {"world", "mobility", "train_sample", "eval_sample", "model"}
    for key in overrides:
        if key not in known:
            raise ConfigError(f"seeds.{key}: unknown seed name")
    merged = {**derived.to_dict(), **{k: int(v) for k, v in overrides.items()}}
    return ExperimentSeeds(**merged)


def experiment_spec(cfg: dict, protocol: str | None = None) -> ExperimentSpec:
    exp = cfg["experiment"]
    protocol = protocol or exp["protocol"]
    if protocol == "antenna":
        tr_rows, tr_cols = exp["antenna_train_size"]
        te_rows, te_cols = exp["antenna_test_size"]
        train_setup = SetupSpec(tr_rows, tr_cols, CodebookSpec("dft"))
        test_setup = SetupSpec(te_rows, te_cols, CodebookSpec("dft"))
    elif protocol == "codebook":
        rows, cols = exp["codebook_array_size"]
        ov = (exp["codebook_oversampling"], exp["codebook_oversampling"])
        count = exp["codebook_subset_count"]
        train_setup = SetupSpec(
            rows, cols, CodebookSpec("random_subset", ov, count, exp["codebook_train_seed"])
        )
        test_setup = SetupSpec(
            rows, cols, CodebookSpec("random_subset", ov, count, exp["codebook_test_seed"])
        )
    elif protocol == "location":
        rows, cols = exp["location_array_size"]
        train_setup = SetupSpec(
            rows, cols, CodebookSpec("dft"), quadrants=tuple(exp["location_train_quadrants"])
        )
        test_setup = SetupSpec(
            rows, cols, CodebookSpec("dft"), quadrants=tuple(exp["location_test_quadrants"])
        )
    else:
        raise ConfigError(f"experiment.protocol: unknown protocol {protocol!r}")

    seeds = experiment_seeds(cfg)
    return ExperimentSpec(
        protocol=protocol,
        train_setup=train_setup,
        test_setup=test_setup,
        seeds=seeds,
        n_train_snapshots=exp["n_train_snapshots"],
        n_eval_snapshots=exp["n_eval_snapshots"],
        radio=radio_config(cfg),
        overhead=overhead_model(cfg),
        world=world_config(cfg),
        mobility=mobility_config(cfg),
        model=model_spec(cfg),
        training=train_config(cfg),
        channel_kwargs=channel_kwargs(cfg),
    )
