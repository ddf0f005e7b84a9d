"""Loader for the acceptance-gate constants (gates.ini)."""

from __future__ import annotations

import configparser
from importlib import resources

from .errors import ValidationError


def _coerce(raw: str):
    parts = raw.split()
    if len(parts) > 1:
        return [float(p) for p in parts]
    try:
        f = float(raw)
    except ValueError:
        return raw
    return int(f) if f == int(f) and "." not in raw and "e" not in raw.lower() else f


class Gates:
    """Flat `section.key` view over the gate file."""

    def __init__(self, values: dict):
        self._values = values

    def __getitem__(self, dotted: str):
        try:
            return self._values[dotted]
        except KeyError:
            raise ValidationError(f"unknown gate constant {dotted!r}") from None

    def as_dict(self) -> dict:
        return dict(self._values)


def load_gates(path=None) -> Gates:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if path is None:
        text = resources.files(__package__).joinpath("gates.ini").read_text()
        parser.read_string(text)
    else:
        read = parser.read(path)
        if not read:
            raise ValidationError(f"gate file not found: {path}")
    values = {f"{sec}.{key}": _coerce(raw)
              for sec in parser.sections()
              for key, raw in parser.items(sec)}
    return Gates(values)


_default = None


def default_gates() -> Gates:
    global _default
    if _default is None:
        _default = load_gates()
    return _default
