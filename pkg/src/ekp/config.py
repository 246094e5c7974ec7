"""Flat key-value experiment configuration.

Grammar (documented in docs/config-format.md): one `key = value` pair per
line, keys are dotted lowercase words, `#` starts a comment, blank lines
ignored.  Values stay strings until a typed getter pulls them out; getters
raise ConfigError naming the offending field.
"""

import re

_KEY_RE = re.compile(r"^[a-z0-9_]+(\.[a-z0-9_]+)*$")


class ConfigError(ValueError):
    pass


def parse_config_text(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_config_text(f.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


class Config:
    def __init__(self, values):
        self.values = dict(values)
        self.used = set()

    @classmethod
    def from_file(cls, path):
        return cls(load_config(path))

    def has(self, key):
        return key in self.values

    def _raw(self, key, default=...):
        self.used.add(key)
        if key in self.values:
            return self.values[key]
        if default is ...:
            raise ConfigError(f"missing required field {key!r}")
        return default

    def get_str(self, key, default=...):
        v = self._raw(key, default)
        return v

    def get_float(self, key, default=...):
        v = self._raw(key, default)
        if isinstance(v, float):
            return v
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"field {key!r}: expected a number, got {v!r}") from None

    def get_int(self, key, default=...):
        v = self._raw(key, default)
        if isinstance(v, int):
            return v
        try:
            return int(v)
        except (TypeError, ValueError):
            raise ConfigError(f"field {key!r}: expected an integer, got {v!r}") from None

    def get_bool(self, key, default=...):
        v = self._raw(key, default)
        if isinstance(v, bool):
            return v
        if v in ("true", "yes", "1"):
            return True
        if v in ("false", "no", "0"):
            return False
        raise ConfigError(f"field {key!r}: expected true/false, got {v!r}")

    def params_with_prefix(self, prefix):
        """All keys under `prefix.` as a {suffix: float-or-str} dict."""
        out = {}
        p = prefix + "."
        for key, value in self.values.items():
            if key.startswith(p):
                self.used.add(key)
                suffix = key[len(p):]
                try:
                    out[suffix] = float(value)
                except ValueError:
                    out[suffix] = value
        return out
