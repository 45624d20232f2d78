"""Plain-text run configuration: `key = value` lines, `#` comments.

Keys are namespaced by component: `net.` (architecture), `train.`
(optimization), `data.` (scene synthesis). Unknown keys are rejected so
typos fail loudly. Tuples are comma-separated; booleans accept
true/false/yes/no/1/0.
"""

import dataclasses
import typing
from pathlib import Path

from .data import SceneConfig
from .errors import ConfigError
from .network import NetworkConfig
from .trainer import TrainConfig

_SECTIONS = {"net": NetworkConfig, "train": TrainConfig, "data": SceneConfig}

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def _parse_scalar(text: str, kind):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if kind is int:
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"expected an integer, got {text!r}") from exc
    if kind is float:
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"expected a number, got {text!r}") from exc
    return text


def _parse_value(text: str, annotation):
    origin = typing.get_origin(annotation)
    if origin in (tuple, list):
        args = typing.get_args(annotation)
        element = args[0] if args else float
        parts = [p for p in text.replace(",", " ").split() if p]
        return tuple(_parse_scalar(p, element) for p in parts)
    return _parse_scalar(text, annotation)


def parse_config_text(text: str):
    """Text -> (NetworkConfig, TrainConfig, SceneConfig)."""
    raw: dict[str, dict[str, str]] = {name: {} for name in _SECTIONS}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} missing a net./train./data. prefix")
        section, field = key.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        if field in raw[section]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[section][field] = value

    built = {}
    for section, cls in _SECTIONS.items():
        hints = typing.get_type_hints(cls)
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for field, value in raw[section].items():
            if field not in fields:
                raise ConfigError(f"unknown key {section}.{field}")
            kwargs[field] = _parse_value(value, hints[field])
        try:
            built[section] = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad {section}.* configuration: {exc}") from exc
    return built["net"], built["train"], built["data"]


def read_config_file(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} does not exist")
    return parse_config_text(path.read_text())


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ", ".join(str(v) for v in value)
    return str(value)


def format_config(net: NetworkConfig, train: TrainConfig, scene: SceneConfig) -> str:
    """Normalized config text covering every field of all three sections."""
    lines = ["# glasskit run configuration"]
    for section, cfg in (("net", net), ("train", train), ("data", scene)):
        lines.append("")
        for f in dataclasses.fields(cfg):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def write_config_file(path, net: NetworkConfig, train: TrainConfig, scene: SceneConfig) -> None:
    Path(path).write_text(format_config(net, train, scene))
