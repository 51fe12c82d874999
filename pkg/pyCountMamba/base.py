# -*- coding: utf-8 -*-

import dataclasses
import json

from .errors import ConfigError
from .const import LOGGER


class ConfigBase(object):
    """Shared behaviour of the dataclass configs"""

    @classmethod
    def field_names(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, values):
        values = dict(values or {})
        unknown = sorted(set(values) - set(cls.field_names()))
        if unknown:
            raise ConfigError("Unknown {} keys: {}".format(
                cls.__name__, ", ".join(unknown)))
        for name in cls._tuple_fields():
            if isinstance(values.get(name), list):
                values[name] = tuple(values[name])
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def _tuple_fields(cls):
        return [f.name for f in dataclasses.fields(cls)
                if isinstance(f.default, tuple)]

    def to_dict(self):
        values = dataclasses.asdict(self)
        for key, value in values.items():
            if isinstance(value, tuple):
                values[key] = list(value)
        return values

    def updated(self, **overrides):
        """Copy with the non-None overrides applied"""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = sorted(set(changes) - set(self.field_names()))
        if unknown:
            raise ConfigError("Unknown {} keys: {}".format(
                type(self).__name__, ", ".join(unknown)))
        if changes:
            LOGGER.debug("%s overrides %s", type(self).__name__, changes)
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def validate(self):
        """Raise ConfigError when an invariant does not hold"""
