"""
Flat run configuration: defaults < config file < command-line flags.

A config file is either `key=value` lines (`#` comments and blank lines ignored) or, when it ends in
.json, a JSON object. Keys are the long flag names with dashes replaced by underscores.
"""
import json

import singer
from jsonschema import Draft4Validator

from ps_teleport.exceptions import ConfigError

LOGGER = singer.get_logger()

RANGE_PATTERN = r"^\s*[0-9.eE+-]+\s*(:\s*[0-9.eE+-]+\s*)?$"

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-04/schema#",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "detector": {"type": "string", "enum": ["spd", "onoff", "on-off", "both"]},
        "lambda": {"type": ["number", "string"], "pattern": RANGE_PATTERN},
        "T": {"type": ["number", "string"], "pattern": RANGE_PATTERN},
        "eta": {"type": ["number", "string"], "pattern": RANGE_PATTERN},
        "grid": {"type": "string", "pattern": r"^\s*[0-9]+\s*[xX]\s*[0-9]+\s*$"},
        "eta_steps": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "nmax": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "minimum": 0, "exclusiveMinimum": True},
        "oracle_tol": {"type": "number", "minimum": 0, "exclusiveMinimum": True},
        "out": {"type": "string"},
        "samples": {"type": "integer", "minimum": 1},
        "emit_plot": {"type": "boolean"},
        "json": {"type": "boolean"},
        "literature": {"type": "boolean"},
        "quantities": {"type": "string"},
        "quantity": {"type": "string", "enum": ["dF", "dN", "both"]},
        "levels": {"type": ["number", "string"]},
        "rows": {"type": "string", "pattern": r"^\s*[a-zA-Z-]+:[0-9.]+(\s*,\s*[a-zA-Z-]+:[0-9.]+)*\s*$"},
        "max_evaluations": {"type": "integer", "minimum": 1},
    },
}

# commands fill in their own defaults for detector, eta, grid and tol
DEFAULTS = {
    "eta_steps": 36,
    "seed": 7,
    "samples": 25,
    "emit_plot": False,
    "json": False,
    "literature": False,
    "quantity": "both",
    "levels": 0.0,
}


def _coerce(value):
    text = value.strip()
    if text.lower() in ("true", "yes", "on"):
        return True
    if text.lower() in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_key_value(text, source="<config>"):
    """
    :param text, str: contents of a key=value config file
    :return: dict with coerced values
    """
    config = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got '{raw.strip()}'")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key in config:
            LOGGER.warning(f"{source}:{number}: '{key}' set more than once, keeping the last value")
        config[key] = _coerce(value)
    return config


def validate_config(config, source="<config>"):
    errors = sorted(Draft4Validator(CONFIG_SCHEMA).iter_errors(config), key=lambda e: list(e.path))
    if errors:
        details = "; ".join(f"{'/'.join(str(p) for p in e.path) or 'config'}: {e.message}" for e in errors)
        raise ConfigError(f"invalid config {source}: {details}")
    return config


def load_config(path):
    """
    Reads and validates a config file.

    :param path, str: path of a key=value or .json config file
    :return: dict of validated settings
    :raises ConfigError: unreadable file, malformed content, unknown keys or wrong value types
    """
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e

    if str(path).endswith(".json"):
        try:
            config = json.loads(text)
        except ValueError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(config, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
    else:
        config = parse_key_value(text, source=path)

    LOGGER.debug(f"loaded config {path}: {config}")
    return validate_config(config, source=path)


def resolve(flags, config=None, keys=None):
    """
    Merges settings: a flag that was given (not None) trumps the config file, which trumps DEFAULTS.

    :param flags, argparse.Namespace:
    :param config, dict: validated config file contents
    :return: dict with one entry per key
    """
    config = config or {}
    keys = keys or sorted(set(DEFAULTS) | set(config) | set(vars(flags)))
    settings = {}
    for key in keys:
        cli = getattr(flags, key, None)
        if cli is not None:
            settings[key] = cli
        elif key in config:
            settings[key] = config[key]
        else:
            settings[key] = DEFAULTS.get(key)
    return settings
