"""
Configuration management for the swarm toolkit
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

load_dotenv()

PROJECT_ROOT = Path(__file__).parent.parent.parent
DEFAULT_SETTINGS_PATH = PROJECT_ROOT / "config" / "settings.yaml"
PRESETS_PATH = PROJECT_ROOT / "config" / "hyper_presets.yaml"


class ConfigManager:
    _instance = None
    _config = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if self._config is None:
            self.load_config()

    def load_config(self, path: Optional[Path] = None):
        """Layer config/settings.yaml, then an optional override file, over the built-in defaults"""
        layers = [DEFAULT_SETTINGS_PATH]
        if path is not None and Path(path).resolve() != DEFAULT_SETTINGS_PATH.resolve():
            layers.append(Path(path))

        merged = self._get_default_config()
        self.sources = []
        for config_path in layers:
            try:
                if not config_path.exists():
                    raise FileNotFoundError(f"Configuration file not found: {config_path}")

                with open(config_path, "r") as f:
                    loaded = yaml.safe_load(f) or {}

                _deep_merge(merged, loaded)
                self.sources.append(config_path)
                logging.info(f"Configuration loaded from {config_path}")

            except Exception as e:
                logging.error(f"Error loading configuration: {e}")

        env_root = os.getenv("SWARMFORGE_OUT")
        if env_root:
            merged["output"]["root"] = env_root
        self._config = merged

    def _get_default_config(self) -> Dict[str, Any]:
        """Return default configuration if files are not found"""
        return {
            "swarm": {
                "groups": 8,
                "particles_per_group": 10,
                "iterations": 1400,
                "hypers_preset": "table8",
                "dtype": "float64",
            },
            "benchmarks": {
                "dimension": 30,
                "trials": 50,
                "pso_particles": 80,
            },
            "hsef": {
                "outer_groups": 8,
                "outer_particles": 10,
                "evolutions": 500,
                "inner_groups": 8,
                "inner_particles": 10,
                "inner_iterations": 1400,
            },
            "planner": {
                "alpha": 30.0,
                "beta": 4.0,
                "gamma": 0.25,
                "delta": 10.0,
                "tw": 20,
                "pi_radius": 20.0,
                "max_iters_per_frame": 50,
                "fixed_iters_per_frame": 30,
                "window_carryover": False,
                "groups": 8,
                "particles_per_group": 170,
                "dimension": 16,
            },
            "scenario": {
                "width": 366.0,
                "height": 366.0,
                "dynamic_obstacles": 6,
                "static_obstacles": 2,
                "max_obstacle_speed": 5.0,
                "side_range": [30.0, 80.0],
                "start": [20.0, 60.0],
                "start_velocity": [0.0, 3.0],
                "target": [346.0, 306.0],
                "target_velocity": [0.0, -8.0],
                "clearance": 15.0,
                "frames": 100,
                "dt": 1.0,
                "seed": 0,
            },
            "output": {
                "root": "runs",
                "svg_stride": 10,
            },
            "logging": {
                "level": "INFO",
                "file": "swarmforge.log",
            },
            "database": {
                "type": "sqlite",
                "path": "data/swarmforge.db",
            },
        }

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value using dot notation (e.g., 'planner.alpha')"""
        if self._config is None:
            self.load_config()

        keys = key.split(".")
        value = self._config

        try:
            for k in keys:
                value = value[k]
            return value
        except (KeyError, TypeError):
            return default

    def get_hsef_config(self) -> Dict[str, Any]:
        return self.get("hsef", {})

    def get_planner_config(self) -> Dict[str, Any]:
        return self.get("planner", {})

    def get_scenario_config(self) -> Dict[str, Any]:
        return self.get("scenario", {})

    def get_database_config(self) -> Dict[str, Any]:
        return self.get("database", {})

    def snapshot(self) -> Dict[str, Any]:
        """Deep copy of the resolved configuration, for manifests"""
        if self._config is None:
            self.load_config()
        return copy.deepcopy(self._config)


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value
    return base


# Global configuration instance
config = ConfigManager()
