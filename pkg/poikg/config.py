"""
Nested configuration objects built from argparse parsers and YAML files.
"""

import argparse
import copy
import os
import sys
from copy import deepcopy
from typing import List, Optional, Dict, Any, Iterator, ClassVar

import yaml
from munch import DefaultMunch
from pydantic import BaseModel, ConfigDict, ValidationError

from poikg.errors import ConfigError


def flatten(params: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Flattens a nested mapping into dotted keys, i.e. ``{"mf": {"k": 4}}`` -> ``{"mf.k": 4}``."""
    flat = {}
    for key, val in params.items():
        dotted = f"{prefix}{key}"
        if isinstance(val, dict):
            flat.update(flatten(val, prefix=dotted + "."))
        else:
            flat[dotted] = val
    return flat


def _iter_parsers(parser: argparse.ArgumentParser) -> Iterator[argparse.ArgumentParser]:
    """Yields the parser and every nested subparser."""
    yield parser
    if parser._subparsers is None:
        return
    for action in parser._subparsers._actions:
        if isinstance(action, argparse._SubParsersAction):
            for choice in action.choices.values():
                yield from _iter_parsers(choice)


def load_yaml_file(path: str) -> Dict[str, Any]:
    path = os.path.abspath(os.path.expanduser(path))
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path) as f:
            params = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}") from e
    if not isinstance(params, dict):
        raise ConfigError(f"Config file {path} must hold a mapping at the top level")
    return params


class Config(DefaultMunch):
    """
    Implementation of the config class, which manages the configuration of the pipeline components.

    Dotted argument names (``transr.learning_rate``) become nested sections
    (``config.transr.learning_rate``).
    """

    __is_set: Dict[str, bool]

    r""" Translates the passed parser into a nested config.

        Args:
            parser (argparse.ArgumentParser):
                Command line parser object.
            strict (bool):
                If ``true``, the command line arguments are strictly parsed.
            args (list of str):
                Command line arguments.
            default (Optional[Any]):
                Default value for the Config. Defaults to ``None``.
                This default will be returned for attributes that are undefined.
        Returns:
            config (config):
                Nested config object created from parser arguments.
    """

    def __init__(
            self,
            parser: argparse.ArgumentParser = None,
            args: Optional[List[str]] = None,
            strict: bool = False,
            default: Optional[Any] = None,
    ) -> None:
        super().__init__(default)

        self["__is_set"] = {}

        if parser is None:
            return None

        # Parsers with subcommands take --config on each subcommand instead.
        if parser._subparsers is None:
            try:
                parser.add_argument(
                    "--config",
                    type=str,
                    help="If set, defaults are overridden by passed file.",
                )
            except argparse.ArgumentError:
                # this can fail if --config has already been added.
                pass

        # Get args from argv if not passed in.
        if args is None:
            args = sys.argv[1:]

        # 1. Optionally load defaults if --config is set.
        config_file_path = getattr(parser.parse_known_args(args)[0], "config", None)
        if config_file_path:
            params_config = flatten(load_yaml_file(config_file_path))
            for sub_parser in _iter_parsers(parser):
                sub_parser.set_defaults(**params_config)

        # 2. Load in params.
        params = Config.__parse_args__(args=args, parser=parser, strict=strict)
        Config.__split_params__(params=params, _config=self)

        # 3. Reparse without defaults to learn which keys were passed explicitly.
        parser_no_defaults = copy.deepcopy(parser)
        for sub_parser in _iter_parsers(parser_no_defaults):
            for action in sub_parser._actions:
                if not isinstance(action, argparse._SubParsersAction):
                    action.default = argparse.SUPPRESS
            # Needed for quirk of argparse
            sub_parser._defaults.clear()
        params_no_defaults = Config.__parse_args__(
            args=args, parser=parser_no_defaults, strict=strict
        )
        self["__is_set"] = {
            arg_key: True
            for arg_key, arg_val in params_no_defaults.__dict__.items()
            if arg_val != argparse.SUPPRESS
        }

    @staticmethod
    def __split_params__(params: argparse.Namespace, _config: "Config"):
        """
        Splits params on dot syntax i.e transr.learning_rate and adds to _config
        """
        for arg_key, arg_val in params.__dict__.items():
            keys = arg_key.split(".")
            head = _config
            while len(keys) > 1:
                if hasattr(head, keys[0]) and head[keys[0]] is not None:
                    head = getattr(head, keys[0])
                else:
                    head[keys[0]] = Config()
                    head = head[keys[0]]
                keys = keys[1:]
            head[keys[0]] = arg_val

    @staticmethod
    def __parse_args__(
            args: List[str], parser: argparse.ArgumentParser = None, strict: bool = False
    ) -> argparse.Namespace:
        """Parses the passed args use the passed parser.

        Args:
            args (List[str]):
                List of arguments to parse.
            parser (argparse.ArgumentParser):
                Command line parser object.
            strict (bool):
                If ``true``, the command line arguments are strictly parsed.
        Returns:
            Namespace:
                Namespace object created from parser arguments.
        """
        if strict:
            return parser.parse_args(args=args)
        params, _ = parser.parse_known_args(args=args)
        return params

    def __deepcopy__(self, memo) -> "Config":
        _default = self.__default__

        config_state = self.__getstate__()
        config_copy = Config()
        memo[id(self)] = config_copy

        config_copy.__setstate__(config_state)
        config_copy.__default__ = _default

        config_copy["__is_set"] = deepcopy(self["__is_set"], memo)

        return config_copy

    def __repr__(self) -> str:
        return self.__str__()

    @staticmethod
    def _remove_private_keys(d):
        d.pop("__is_set", None)
        for v in d.values():
            if isinstance(v, dict):
                Config._remove_private_keys(v)
        return d

    def __str__(self) -> str:
        visible = Config._remove_private_keys(copy.deepcopy(self.toDict()))
        return "\n" + yaml.dump(visible, sort_keys=False)

    def copy(self) -> "Config":
        return copy.deepcopy(self)

    def update_with_kwargs(self, kwargs):
        """Add config to self"""
        for key, val in kwargs.items():
            self[key] = val

    @classmethod
    def _merge(cls, a, b):
        """Merge two configurations recursively.
        If there is a conflict, the value from the second configuration will take precedence.
        """
        for key in b:
            if key in a and isinstance(a[key], dict) and isinstance(b[key], dict):
                a[key] = cls._merge(a[key], b[key])
            else:
                a[key] = b[key]
        return a

    def merge(self, b):
        """
        Merges the current config with another config.

        Args:
            b: Another config to merge.
        """
        self._merge(self, b)

    @classmethod
    def merge_all(cls, configs: List["Config"]) -> "Config":
        """
        Merge all configs in the list into one config.
        If there is a conflict, the value from the last configuration in the list will take precedence.
        """
        result = cls()
        for cfg in configs:
            result.merge(cfg)
        return result

    def is_set(self, param_name: str) -> bool:
        """
        Returns a boolean indicating whether the parameter has been set or is still the default.
        """
        return bool(self.get("__is_set", {}).get(param_name, False))


class ConfigSection(BaseModel):
    """
    Typed, validated view over one section of a :class:`Config`.

    Subclasses name their ``section`` and declare their own ``add_args``; the
    parsed section is validated with :meth:`from_config`.
    """

    model_config = ConfigDict(extra="ignore", frozen=True)

    section: ClassVar[str] = ""

    @classmethod
    def from_config(cls, config: Optional[Dict[str, Any]] = None, **overrides):
        """
        Validates ``config[section]``. A plain mapping without that key is
        taken to be the section itself; a :class:`Config` without it yields
        the defaults.
        """
        values: Dict[str, Any] = {}
        if config is not None:
            section = config.get(cls.section)
            if not isinstance(section, dict):
                section = {} if isinstance(config, Config) else config
            values = {k: v for k, v in dict(section).items() if v is not None and not k.startswith("__")}
        values.update(overrides)
        try:
            return cls.model_validate(values)
        except ValidationError as e:
            raise ConfigError(f"Invalid '{cls.section}' config: {e}") from e

    @classmethod
    def add_args(cls, parser: argparse.ArgumentParser, prefix: Optional[str] = None):
        raise NotImplementedError

    @classmethod
    def config(cls) -> "Config":
        """Get config from the argument parser.

        Return:
            config object
        """
        parser = argparse.ArgumentParser()
        cls.add_args(parser)
        return Config(parser, args=[])
