"""Layered settings: command line > environment > config file > built-in default.

The config file is INI style (``[section]`` headers, ``key = value`` lines).
An option ``section.key`` is read from the environment as
``GADGETFORGE_SECTION_KEY`` (upper-cased, dashes and dots become underscores).
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path
from typing import Any, Callable, Mapping

from .errors import DataError

ENV_PREFIX = "GADGETFORGE_"


class ConfigError(DataError):
    pass


def env_name(section: str, key: str) -> str:
    return (ENV_PREFIX + f"{section}_{key}").upper().replace("-", "_").replace(".", "_")


def _to_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


class Settings:
    def __init__(self, path=None, env: Mapping[str, str] | None = None):
        self.parser = configparser.ConfigParser(interpolation=None)
        self.parser.optionxform = str
        self.path = Path(path) if path else None
        if self.path is not None:
            if not self.path.is_file():
                raise ConfigError(f"config file {self.path} does not exist")
            try:
                self.parser.read(self.path, encoding="utf-8")
            except configparser.Error as exc:
                raise ConfigError(f"{self.path}: {exc}") from exc
        self.env = os.environ if env is None else env

    def raw(self, section: str, key: str) -> tuple[str | None, str]:
        """(value, origin) without the command-line layer."""
        name = env_name(section, key)
        if name in self.env:
            return self.env[name], "env"
        for k in (key, key.replace("-", "_"), key.replace("_", "-")):
            if self.parser.has_option(section, k):
                return self.parser.get(section, k), "file"
        return None, "default"

    def get(self, section: str, key: str, cli_value: Any = None, default: Any = None,
            convert: Callable[[str], Any] | None = None) -> Any:
        if cli_value is not None:
            return cli_value
        text, origin = self.raw(section, key)
        if text is None:
            return default
        if convert is None:
            convert = type(default) if default is not None and not isinstance(default, str) else str
        if convert is bool:
            convert = _to_bool
        try:
            return convert(text.strip())
        except ValueError as exc:
            raise ConfigError(f"{section}.{key} from {origin}: {exc}") from exc

    def section(self, name: str) -> dict[str, str]:
        return dict(self.parser.items(name)) if self.parser.has_section(name) else {}

    def fill_dataclass(self, cls, section: str, cli_values: Mapping[str, Any], **defaults):
        """Instantiate ``cls`` resolving each field through the layers."""
        from dataclasses import MISSING, fields

        kwargs = {}
        for f in fields(cls):
            base = defaults.get(f.name, f.default if f.default is not MISSING else None)
            kwargs[f.name] = self.get(section, f.name, cli_values.get(f.name), base)
        return cls(**kwargs)
