# -*- coding: utf-8 -*-
"""
Settings library which reads the same settings from a YAML file and
from the command line, where CLI flags can be spread across (possibly
nested) subcommands.

load - sets defaults, then loads from YAML, then loads from CLI.
load_from_yaml_stream - loads from YAML only.
write_to_stream - writes the current values as commented YAML.
"""

import argparse
import pathlib
import textwrap
import typing

import ruamel.yaml as ryaml
import ruamel.yaml.error as ryaml_error

import boardcrawl

YAML_WIDTH = 88
GROUP_DIVIDER = "# " * (YAML_WIDTH // 2)
YAML_INDENT = 2


class ConfigFileError(Exception):
    """
    Raised when a config file can't be read, or holds values that
    don't fit the settings they name.
    """

    def __init__(self, message: str, missing: bool = False):
        super().__init__(message)
        self.missing = missing


SettingDictType = typing.Dict[
    str, typing.Union[bool, int, float, str, typing.List[str]]
]

SettingValueType = typing.Union[
    bool, int, float, str, typing.List[str], SettingDictType
]

# subcommand path ("crawl", "fixture gen") -> help text.  Parents
# must come before their children.
CommandTable = typing.Dict[str, str]


def _yaml_comment(lines: typing.List[str]) -> str:
    wrapped = ["\n".join(textwrap.wrap(line, width=YAML_WIDTH)) for line in lines]
    return "\n" + "\n".join(wrapped)


def _put_commented(
    mapping: ryaml.CommentedMap,
    key: str,
    value: typing.Any,
    comment_lines: typing.List[str],
    indent: int,
) -> None:
    mapping[key] = value
    mapping.yaml_set_comment_before_after_key(
        key, before=_yaml_comment(comment_lines), indent=indent
    )


def _kind_of(value: typing.Any) -> type:
    # bool before int: True is an int too
    for kind in (bool, str, int, float, list, dict):
        if isinstance(value, kind):
            return kind
    return type(value)


T = typing.TypeVar("T", bound="SettingValueType")


class ConfigSetting(typing.Generic[T]):
    """
    One setting, readable from config.yml and/or the command line.

    The type of the default decides how CLI strings and YAML scalars
    are converted.  A positional setting is an optional positional
    argument.  `commands`, when given, narrows the subcommands the
    setting appears on to a subset of its group's.
    """

    def __init__(
        self,
        name: str,
        default: T,
        description_lines: typing.List[str],
        cli_args: typing.Optional[typing.List[str]] = None,
        include_in_argparse: bool = True,
        include_in_yaml: bool = True,
        positional: bool = False,
        choices: typing.Optional[typing.List[typing.Any]] = None,
        metavar: typing.Optional[str] = None,
        commands: typing.Optional[typing.List[str]] = None,
    ):
        self.name = name
        self.default = default
        self.kind = _kind_of(default)
        self.description_lines = [line.strip() for line in description_lines]
        self.cli_args = cli_args or ["--" + name.replace("_", "-")]
        self.value = default
        self.include_in_argparse = include_in_argparse
        self.include_in_yaml = include_in_yaml
        self.positional = positional
        self.choices = choices
        self.metavar = metavar
        self.commands = commands

    def applies_to(self, command: typing.Optional[str]) -> bool:
        return self.commands is None or command is None or command in self.commands

    def _argparse_kwargs(self, suppress_default: bool) -> typing.Dict[str, typing.Any]:
        kwargs: typing.Dict[str, typing.Any] = {
            "default": argparse.SUPPRESS if suppress_default else self.value,
            "help": " ".join(self.description_lines),
        }
        if self.kind is bool:
            kwargs["action"] = "store_false" if self.default else "store_true"
        elif self.kind is list:
            kwargs["type"] = str
            kwargs["nargs"] = "*"
        else:
            kwargs["type"] = self.kind
        if self.choices is not None:
            kwargs["choices"] = self.choices
        if self.metavar is not None and "action" not in kwargs:
            kwargs["metavar"] = self.metavar
        if self.positional:
            kwargs["nargs"] = "?"
        return kwargs

    def add_to_argparse(
        self,
        parser: argparse._ArgumentGroup,
        suppress_default: bool = False,
    ):
        """
        suppress_default leaves the namespace untouched unless the flag
        is given, so a subcommand can repeat a top-level flag without
        overwriting its value.
        """
        if not self.include_in_argparse:
            return
        kwargs = self._argparse_kwargs(suppress_default)
        if self.positional:
            parser.add_argument(self.name, **kwargs)
        else:
            parser.add_argument(*self.cli_args, dest=self.name, **kwargs)

    def set_value_from_argparse(self, args: argparse.Namespace) -> None:
        # absent when the flag belongs to another subcommand
        if self.include_in_argparse and hasattr(args, self.name):
            self.value = getattr(args, self.name)

    def yaml_comment(self) -> typing.List[str]:
        lines = self.description_lines.copy()
        if self.choices is not None:
            lines.append("  choices: " + ", ".join(str(c) for c in self.choices))
        default = "" if self.default is None else self.default
        lines.append(f"  default: {default}")
        return lines

    def add_to_yaml_group(self, group: ryaml.CommentedMap):
        if not self.include_in_yaml:
            return
        # unchanged settings are left blank, so new defaults still apply
        value = self.value if self.value != self.default else None
        _put_commented(group, self.name, value, self.yaml_comment(), YAML_INDENT)

    def coerce(self, value: typing.Any) -> typing.Any:
        """
        Converts a YAML value to the type of the default.

        raises ValueError if it can't be converted.
        """
        if self.kind is bool and isinstance(value, str):
            lowered = value.lower()
            if lowered not in ("true", "yes", "1", "false", "no", "0"):
                raise ValueError(f"{self.name}: {value!r} is not a boolean")
            return lowered in ("true", "yes", "1")
        if self.kind is float and isinstance(value, (int, str)):
            # "1e-8" reads as a string
            return float(value)
        if self.kind is int and isinstance(value, str):
            return int(value)
        if self.kind is list and isinstance(value, str):
            return [value]
        if self.kind is dict:
            if not isinstance(value, dict):
                raise ValueError(f"{self.name} must be a mapping")
            # a partial mapping is layered over the default
            return {**typing.cast(dict, self.default), **value}
        if self.kind is not dict and isinstance(value, dict):
            raise ValueError(f"{self.name} must not be a mapping")
        return value

    def set_value_from_yaml(self, group: typing.Mapping[str, typing.Any]) -> None:
        if not self.include_in_yaml:
            return
        # a blank entry keeps the default
        if group.get(self.name) is None:
            return
        self.value = self.coerce(group[self.name])
        if self.choices is not None and self.value not in self.choices:
            raise ValueError(
                f"{self.name} must be one of {', '.join(map(str, self.choices))}"
            )

    def get(self) -> T:
        if isinstance(self.value, (dict, list)):
            return self.value.copy()  # type: ignore
        return self.value


class ConfigSettingGroup:
    """
    Related settings, shown together in --help and stored under one
    key in config.yml.

    `commands` lists the subcommands the group's CLI flags appear on.
    A group without commands is global: its flags go on the top-level
    parser and are repeated on every subcommand.
    """

    def __init__(
        self,
        name: str,
        description: str = "",
        include_in_yaml: bool = True,
        commands: typing.Optional[typing.List[str]] = None,
    ):
        self.name = name
        self.description = description
        self.settings: typing.Dict[str, ConfigSetting] = {}
        self.include_in_yaml = include_in_yaml
        self.commands = commands

    @property
    def group_key(self) -> str:
        return self.name.lower().replace(" ", "_")

    def add_setting(self, setting: "ConfigSetting") -> None:
        self.settings[setting.name] = setting

    def applies_to(self, command: typing.Optional[str]) -> bool:
        return self.commands is None or command in self.commands

    def add_to_argparse(
        self,
        parser: argparse.ArgumentParser,
        command: typing.Optional[str] = None,
        suppress_default: bool = False,
    ):
        settings = [
            setting
            for setting in self.settings.values()
            if setting.include_in_argparse and setting.applies_to(command)
        ]
        if not settings:
            return
        arg_group = parser.add_argument_group(self.name, self.description)
        for setting in settings:
            setting.add_to_argparse(arg_group, suppress_default=suppress_default)

    def set_values_from_argparse(self, args: argparse.Namespace) -> None:
        for setting in self.settings.values():
            setting.set_value_from_argparse(args)

    def add_to_yaml(self, yaml: ryaml.CommentedMap):
        if not self.include_in_yaml:
            return
        group = ryaml.CommentedMap()
        for setting in self.settings.values():
            setting.add_to_yaml_group(group)
        _put_commented(
            yaml, self.group_key, group, [GROUP_DIVIDER, self.group_key, "."], 0
        )

    def set_values_from_yaml(self, yaml: typing.Mapping[str, typing.Any]):
        if not self.include_in_yaml:
            return
        group = yaml.get(self.group_key)
        if group is None:
            return
        if not isinstance(group, dict):
            raise ValueError(f"{self.group_key} must be a mapping of settings")
        for setting in self.settings.values():
            setting.set_value_from_yaml(group)

    def get_setting(self, name: str) -> ConfigSetting:
        return self.settings[name]

    def get(self, name: str) -> SettingValueType:
        return self.settings[name].get()

    def _typed(self, name: str, kinds: typing.Tuple[type, ...]) -> typing.Any:
        value = self.settings[name].get()
        if value is not None and not isinstance(value, kinds):
            raise TypeError(f"Setting {name} is {value!r}, not {kinds[0].__name__}")
        return value

    def get_str(self, name: str) -> str:
        return self._typed(name, (str,))

    def get_int(self, name: str) -> int:
        return self._typed(name, (int,))

    def get_float(self, name: str) -> float:
        return self._typed(name, (float, int))

    def get_list(self, name: str) -> typing.List[SettingValueType]:
        return self._typed(name, (list,))


def load_from_yaml_stream(
    stream: typing.Union[pathlib.Path, ryaml.StreamTextType],
    setting_groups: typing.List["ConfigSettingGroup"],
) -> None:
    """
    Load settings from a YAML stream only.

    raises ConfigFileError if the YAML is malformed or doesn't fit
    the settings.
    """
    try:
        loaded = ryaml.YAML(typ="safe").load(stream)
    except ryaml_error.MarkedYAMLError as err:
        raise ConfigFileError(str(err)) from err
    if loaded is None:
        return
    if not isinstance(loaded, dict):
        raise ConfigFileError("Config file must be a mapping of setting groups")
    try:
        for group in setting_groups:
            group.set_values_from_yaml(loaded)
    except (TypeError, ValueError) as err:
        raise ConfigFileError(str(err)) from err


def load_from_yaml(
    filename: str,
    setting_groups: typing.List["ConfigSettingGroup"],
) -> None:
    """
    Load settings from a YAML file only.

    raises ConfigFileError, with `missing` set if there was no file.
    """
    try:
        with open(filename, "r", encoding="utf-8") as file:
            load_from_yaml_stream(file, setting_groups)
    except (FileNotFoundError, IsADirectoryError) as err:
        raise ConfigFileError("File not found", missing=True) from err


def _subcommand_dest(parent_path: str) -> str:
    if not parent_path:
        return "command"
    return parent_path.replace(" ", "_") + "_command"


def build_cli_parser(
    setting_groups: typing.List["ConfigSettingGroup"],
    commands: CommandTable,
    description: str,
) -> argparse.ArgumentParser:
    """
    Builds the top-level parser with one subparser per command.

    Must run after config.yml is read, so that the argparse defaults
    are the values read from it.
    """
    cli_parser = argparse.ArgumentParser(
        prog="boardcrawl",
        description=description,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    global_groups = [group for group in setting_groups if group.commands is None]
    for group in global_groups:
        group.add_to_argparse(cli_parser)

    parsers: typing.Dict[str, argparse.ArgumentParser] = {"": cli_parser}
    subparser_actions: typing.Dict[str, typing.Any] = {}
    for path, help_text in commands.items():
        parent_path, _, name = path.rpartition(" ")
        if parent_path not in subparser_actions:
            action = parsers[parent_path].add_subparsers(
                dest=_subcommand_dest(parent_path), metavar="command"
            )
            # the top level may run without a command (--generate-config)
            action.required = bool(parent_path)
            subparser_actions[parent_path] = action
        parsers[path] = subparser_actions[parent_path].add_parser(
            name,
            help=help_text,
            description=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )

    leaf_paths = [path for path in commands if path not in subparser_actions]
    for path in leaf_paths:
        for group in global_groups:
            group.add_to_argparse(parsers[path], command=path, suppress_default=True)
        for group in setting_groups:
            if group.commands is not None and group.applies_to(path):
                group.add_to_argparse(parsers[path], command=path)

    return cli_parser


def command_from_namespace(
    args: argparse.Namespace, commands: CommandTable
) -> typing.Optional[str]:
    """
    Returns the full path of the subcommand that was run, or None.
    """
    path = getattr(args, _subcommand_dest(""), None)
    if path is None:
        return None
    while any(other.startswith(path + " ") for other in commands):
        path = path + " " + getattr(args, _subcommand_dest(path))
    return path


def load_from_cli(
    args: typing.List[str],
    setting_groups: typing.List["ConfigSettingGroup"],
    commands: CommandTable,
    description: str = "",
) -> typing.Tuple[argparse.ArgumentParser, typing.Optional[str]]:
    """
    Load settings from the command line only.

    Returns the parser and the subcommand that was run.  Invalid
    arguments make argparse print usage and exit with status 2.
    """
    cli_parser = build_cli_parser(
        setting_groups,
        commands,
        description or f"boardcrawl v{boardcrawl.__version__}",
    )
    namespace = cli_parser.parse_args(args=args)
    for group in setting_groups:
        group.set_values_from_argparse(namespace)
    return cli_parser, command_from_namespace(namespace, commands)


def load(
    cli_args: typing.List[str],
    setting_groups: typing.List["ConfigSettingGroup"],
    config_file: str,
    raise_if_file_missing: bool,
    commands: CommandTable,
    description: str = "",
) -> typing.Tuple[argparse.ArgumentParser, typing.Optional[str]]:
    """
    Load settings from defaults, config.yml, and command line arguments
    in that order.  Later sources will overwrite earlier ones.

    Returns the argparse parser, for printing help, and the
    subcommand that was run.
    """
    try:
        load_from_yaml(config_file, setting_groups)
    except ConfigFileError as err:
        if raise_if_file_missing or not err.missing:
            raise
    return load_from_cli(cli_args, setting_groups, commands, description)


START_COMMENT = textwrap.dedent(
    """
    # boardcrawl configuration
    #
    # This is a YAML file, and comments are allowed.  boardcrawl
    # attempts to load a file named "config.yml" from the current
    # directory when it is run.  Command-line flags override it.
    #
    """
)


def write_to_stream(
    setting_groups: typing.List["ConfigSettingGroup"],
    out_stream: typing.TextIO,
) -> None:
    yaml_map = ryaml.CommentedMap()
    yaml_map.yaml_set_start_comment(START_COMMENT)
    _put_commented(yaml_map, "version", boardcrawl.__version__, [], 0)
    for group in setting_groups:
        group.add_to_yaml(yaml_map)

    yaml = ryaml.YAML()
    yaml.default_flow_style = False
    yaml.allow_unicode = True
    yaml.indent(mapping=YAML_INDENT, sequence=2 * YAML_INDENT, offset=YAML_INDENT)
    yaml.dump(yaml_map, out_stream)
