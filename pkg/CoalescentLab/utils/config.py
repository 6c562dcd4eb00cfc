"""Experiment configuration for CoalescentLab."""
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import chardet

from CoalescentLab.model.subordinator import SubordinatorSpec

COMMANDS = (
    'simulate-coalescent', 'simulate-fragmentation', 'density', 'verify-martingale',
    'verify-marginal', 'verify-pde', 'classify-spec', 'verify-limits', 'verify-duality',
    'verify-asymptotic',
)
DENSITY_QUANTITIES = ('g', 'h', 'H', 'hn', 'marginal', 'joint', 'tail')
SPEC_COMMANDS = ('density', 'verify-martingale', 'verify-pde', 'classify-spec', 'verify-limits')


class ConfigError(ValueError):
    """Raised when a configuration knob is missing or out of range."""


def read_file_safe(file_path: Path) -> str:
    """Read a text file after detecting its encoding."""
    with open(file_path, 'rb') as f:
        raw_data = f.read()
    encoding = chardet.detect(raw_data)['encoding'] or 'utf-8'
    return raw_data.decode(encoding, errors='replace')


def read_json_file(file_path: Path) -> Any:
    try:
        return json.loads(read_file_safe(Path(file_path)))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{file_path} is not valid JSON: {e}") from e


def parse_spec_argument(text: str) -> Dict[str, Any]:
    """Decode ``--spec``: inline JSON when it starts with '{', else a file path."""
    text = text.strip()
    if text.startswith('{'):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"--spec is not valid JSON: {e}") from e
    else:
        path = Path(text)
        if not path.is_file():
            raise ConfigError(f"--spec file not found: {text}")
        data = read_json_file(path)
    if not isinstance(data, dict):
        raise ConfigError("--spec must decode to a JSON object")
    return data


class ExperimentConfig:
    """Defaults, an optional JSON file and explicit flags, in that order of precedence."""

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = Path(config_file) if config_file else None
        self.config: Dict[str, Any] = self._load_default_config()
        if self.config_file is not None:
            self.load()

    def _load_default_config(self) -> Dict[str, Any]:
        """Return default configuration."""
        return {
            "command": None,
            "spec": None,
            "seed": None,
            "t": 1.0,
            "t_list": [0.5, 1.0],
            "x": [0.5],
            "x_list": [0.25, 0.5, 1.0],
            "n": 256,
            "grid_n": 2 ** 14,
            "replicates": 100,
            "mc": 10_000,
            "normalizer_mc": 1_000_000,
            "tol": 1e-4,
            "workers": 1,
            "theta": [],
            "literal_sigma": False,  # read sigma = 1 - sum(theta^2) instead of sigma^2
            "what": "g",
            "bins": 20,
            "duality_bins": 10,
            "delta": 0.5,
            "x_max": 1e6,
            "classify_tol": 1e-2,
            "functional": "one",
            "ranks": [50, 200],
            "output": None,
            "markdown": None,
        }

    def load(self):
        """Merge the JSON configuration file over the defaults."""
        if not self.config_file.is_file():
            raise ConfigError(f"config file not found: {self.config_file}")
        loaded = read_json_file(self.config_file)
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(self.config))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        self.config.update(loaded)

    def save(self, path: Path):
        """Write the configuration as JSON."""
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.config, f, indent=2, sort_keys=True)

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value."""
        return self.config.get(key, default)

    def set(self, key: str, value: Any):
        """Set configuration value."""
        if key not in self.config:
            raise ConfigError(f"unknown config key {key!r}")
        self.config[key] = value

    def update(self, values: Dict[str, Any]):
        """Apply explicit overrides, skipping unset (None) values."""
        for key, value in values.items():
            if value is not None:
                self.set(key, value)

    def get_spec(self) -> Optional[SubordinatorSpec]:
        """The subordinator specification, if one was given."""
        data = self.config.get("spec")
        if data is None:
            return None
        if isinstance(data, str):
            data = parse_spec_argument(data)
        try:
            return SubordinatorSpec.from_dict(data)
        except ValueError as e:
            raise ConfigError(f"invalid spec: {e}") from e

    def get_seed(self) -> int:
        return int(self.config["seed"])

    def to_dict(self) -> Dict[str, Any]:
        data = dict(self.config)
        spec = self.get_spec()
        if spec is not None:
            data["spec"] = spec.to_dict()
        return data

    def validate(self):
        """Check every knob; raise ConfigError naming all violations."""
        errors: List[str] = []
        c = self.config

        def number(key: str) -> Optional[float]:
            value = c.get(key)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                errors.append(f"{key} must be a finite number, got {value!r}")
                return None
            return float(value)

        def integer(key: str, low: int):
            value = c.get(key)
            if isinstance(value, bool) or not isinstance(value, int):
                errors.append(f"{key} must be an integer, got {value!r}")
            elif value < low:
                errors.append(f"{key} must be >= {low}, got {value}")

        if c["command"] not in COMMANDS:
            errors.append(f"unknown command {c['command']!r}")
        seed = c.get("seed")
        if seed is None:
            errors.append("seed is mandatory")
        elif isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            errors.append(f"seed must be an integer in [0, 2^64), got {seed!r}")
        t = number("t")
        if t is not None and t < 0:
            errors.append(f"t must be >= 0, got {t}")
        for key in ("t_list", "x", "x_list", "theta"):
            values = c.get(key)
            if not isinstance(values, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
                errors.append(f"{key} must be a list of numbers")
        if isinstance(c.get("t_list"), list) and any(v < 0 for v in c["t_list"]
                                                     if isinstance(v, (int, float))):
            errors.append("t_list entries must be >= 0")
        integer("grid_n", 2)
        integer("replicates", 1)
        integer("mc", 1)
        integer("normalizer_mc", 1)
        integer("workers", 1)
        integer("n", 1)
        integer("bins", 2)
        integer("duality_bins", 2)
        ranks = c.get("ranks")
        if not (isinstance(ranks, list) and len(ranks) == 2 and all(isinstance(r, int) for r in ranks)
                and 1 <= ranks[0] <= ranks[1]):
            errors.append(f"ranks must be two integers 1 <= low <= high, got {ranks!r}")
        tol = number("tol")
        if tol is not None and not tol > 0:
            errors.append(f"tol must be > 0, got {tol}")
        delta = number("delta")
        if delta is not None and not 0.0 < delta < 1.0:
            errors.append(f"delta must lie in (0, 1), got {delta}")
        if c.get("what") not in DENSITY_QUANTITIES:
            errors.append(f"what must be one of {', '.join(DENSITY_QUANTITIES)}")
        if c["command"] in SPEC_COMMANDS:
            if c.get("spec") is None:
                errors.append(f"{c['command']} needs --spec")
            else:
                try:
                    self.get_spec()
                except ConfigError as e:
                    errors.append(str(e))
        if errors:
            raise ConfigError("; ".join(errors))
