# -*- coding: utf-8 -*-
"""
Documents all the settings for boardcrawl.  Allows for settings
to be loaded from the environment, command line and config file.

Methods:
    - load:
        loads settings from the environment, command line and config file

    - validate:
        checks the settings the chosen subcommand needs

    - write_to_stream:
        writes the current config file to the given stream

Attributes:
    - setting_groups:
        a list of all the setting groups

    - general_settings:
        settings for every subcommand, not included in the config file

    - store_settings, crawl_settings, rank_settings, query_settings,
      search_settings, classifier_settings, fixture_gen_settings,
      fixture_serve_settings, evaluation_settings:
        one group per stage
"""
import argparse
import math
import os
import shutil
import textwrap
import typing

from boardcrawl import classifier
from boardcrawl import crawler
from boardcrawl import graph_model
import boardcrawl.overengineered_settings_parser as oesp
from boardcrawl import ranker
from boardcrawl import scanner


class SettingsError(Exception):
    """
    Base class for exceptions in this module.
    """

    def __init__(self, message: str, cause: typing.Optional[Exception] = None):
        self.message = message
        super().__init__(message, cause)

    def __str__(self) -> str:
        return self.message


def _console_wrapped(message):
    width = shutil.get_terminal_size().columns
    return "\n".join(textwrap.wrap(message, width))


class Settings:
    """
    User-customizable settings for boardcrawl.  Reads from
    environment variables, the config file and command line arguments.
    """

    # ENVIRONMENT VARIABLES ####
    STORE_ENV_VAR: str = "BOARDCRAWL_STORE"

    COMMANDS: oesp.CommandTable = {
        "crawl": "Crawl a board from a seed URL, rank it and write the store.",
        "rank": "Recompute PageRank and AttachRank for an existing store.",
        "search": "Search a store's attachments, ranked with AttachRank.",
        "verify": "Audit a store for consistency.  Exits 4 on findings.",
        "evaluate": "Compare precision with and without AttachRank.",
        "fixture": "Generate or serve a synthetic bulletin board.",
        "fixture gen": "Generate a synthetic board and its ground truth.",
        "fixture serve": "Serve a directory over HTTP until interrupted.",
    }
    STORE_COMMANDS = ["crawl", "rank", "search", "verify", "evaluate"]

    LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]
    SCOPES = ["host", "any"]
    FORMATS = ["table", "records"]

    def __init__(self):
        self.arg_parser: typing.Optional[argparse.ArgumentParser] = None
        self.command: typing.Optional[str] = None
        self.setting_groups: typing.List[oesp.ConfigSettingGroup] = []

        ###########################################################
        # General Settings
        #  won't be included in the config.yaml

        self.general_settings = oesp.ConfigSettingGroup(
            "General Settings", include_in_yaml=False
        )
        self.setting_groups.append(self.general_settings)

        # read a path to a config file from the command line
        self.general_settings.add_setting(
            oesp.ConfigSetting[str](
                name="config",
                default="config.yml",
                description_lines=[
                    "Path to a config file to read settings from.",
                    "Command line settings will override settings in this file.",
                ],
                cli_args=["-c", "--config"],
            )
        )
        self.general_settings.add_setting(
            oesp.ConfigSetting[bool](
                name="generate_config",
                default=False,
                description_lines=[
                    textwrap.dedent(
                        """
                        If set, boardcrawl will print its configuration as a
                        .yml file, then exit.  Any command-line settings also
                        passed will be reflected in this file.
                        """
                    )
                ],
            )
        )
        self.general_settings.add_setting(
            oesp.ConfigSetting[str](
                name="log_level",
                default="INFO",
                description_lines=["Logging level, logs go to stderr."],
                choices=self.LOG_LEVELS,
            )
        )

        ###########################################################
        # Store Settings

        self.store_settings = oesp.ConfigSettingGroup(
            "Store", commands=self.STORE_COMMANDS
        )
        self.setting_groups.append(self.store_settings)

        self.store_settings.add_setting(
            oesp.ConfigSetting[str](
                name="store",
                default=os.environ.get(self.STORE_ENV_VAR, ""),
                description_lines=[
                    "Directory of the attachment store.  crawl writes it, the "
                    + "other commands read it.",
                    f"Defaults to the {self.STORE_ENV_VAR} environment variable.",
                ],
                cli_args=["--store", "--out"],
                metavar="DIR",
            )
        )

        ###########################################################
        # Crawl Settings

        self.crawl_settings = oesp.ConfigSettingGroup("Crawl", commands=["crawl"])
        self.setting_groups.append(self.crawl_settings)

        self.crawl_settings.add_setting(
            oesp.ConfigSetting[str](
                name="seed_url",
                default="",
                description_lines=["URL of the board's front page."],
                positional=True,
                metavar="url",
            )
        )
        self.crawl_settings.add_setting(
            oesp.ConfigSetting[int](
                name="max_pages",
                default=10000,
                description_lines=["Stop after fetching this many pages."],
            )
        )
        self.crawl_settings.add_setting(
            oesp.ConfigSetting[int](
                name="parallelism",
                default=4,
                description_lines=["Number of fetches in flight at once."],
            )
        )
        self.crawl_settings.add_setting(
            oesp.ConfigSetting[float](
                name="delay_ms",
                default=200.0,
                description_lines=[
                    "Minimum time between two requests to the same host, in "
                    + "milliseconds.  0 turns politeness off."
                ],
                cli_args=["--delay"],
                metavar="MS",
            )
        )
        self.crawl_settings.add_setting(
            oesp.ConfigSetting[float](
                name="fetch_timeout",
                default=10.0,
                description_lines=["Total timeout of one fetch, in seconds."],
                cli_args=["--timeout"],
            )
        )
        self.crawl_settings.add_setting(
            oesp.ConfigSetting[str](
                name="scope",
                default="host",
                description_lines=[
                    "Follow links on the seed's host only, or on any host."
                ],
                choices=self.SCOPES,
            )
        )
        self.crawl_settings.add_setting(
            oesp.ConfigSetting[bool](
                name="respect_robots",
                default=False,
                description_lines=["Honor each host's robots.txt."],
            )
        )

        ###########################################################
        # Rank Settings

        self.rank_settings = oesp.ConfigSettingGroup(
            "Rank", commands=["crawl", "rank"]
        )
        self.setting_groups.append(self.rank_settings)

        self.rank_settings.add_setting(
            oesp.ConfigSetting[float](
                name="d",
                default=ranker.RankConfig.DEFAULT_D,
                description_lines=["PageRank damping factor, in (0, 1)."],
                cli_args=["--d"],
            )
        )
        self.rank_settings.add_setting(
            oesp.ConfigSetting[float](
                name="epsilon",
                default=ranker.RankConfig.DEFAULT_EPSILON,
                description_lines=[
                    "Stop iterating once the L1 change between sweeps is below "
                    + "this."
                ],
            )
        )
        self.rank_settings.add_setting(
            oesp.ConfigSetting[int](
                name="max_iterations",
                default=ranker.RankConfig.DEFAULT_MAX_ITERATIONS,
                description_lines=["Give up iterating after this many sweeps."],
            )
        )

        ###########################################################
        # Query Settings
        #  the query itself, never read from the config file

        self.query_settings = oesp.ConfigSettingGroup(
            "Query", include_in_yaml=False, commands=["search"]
        )
        self.setting_groups.append(self.query_settings)

        self.query_settings.add_setting(
            oesp.ConfigSetting[str](
                name="query",
                default="",
                description_lines=["Words to search for."],
                positional=True,
                metavar="query",
            )
        )

        ###########################################################
        # Search Settings

        self.search_settings = oesp.ConfigSettingGroup(
            "Search", commands=["search", "evaluate"]
        )
        self.setting_groups.append(self.search_settings)

        self.search_settings.add_setting(
            oesp.ConfigSetting[int](
                name="k",
                default=10,
                description_lines=["Number of results to return."],
                cli_args=["--k"],
            )
        )
        self.search_settings.add_setting(
            oesp.ConfigSetting[float](
                name="ar_weight",
                default=1.0,
                description_lines=[
                    "Weight of AttachRank in the final score.  0 ranks by "
                    + "lexical score alone."
                ],
                cli_args=["--lambda"],
                metavar="LAMBDA",
            )
        )
        self.search_settings.add_setting(
            oesp.ConfigSetting[str](
                name="format",
                default="table",
                description_lines=["Output format for search results."],
                choices=self.FORMATS,
                commands=["search"],
            )
        )
        self.search_settings.add_setting(
            oesp.ConfigSetting[typing.List[str]](
                name="classes",
                default=[],
                description_lines=[
                    "Only return attachments of these classes.",
                    "Classes: "
                    + ", ".join(str(c) for c in graph_model.AttachmentClass),
                ],
                cli_args=["--class"],
                metavar="CLASS",
                commands=["search"],
            )
        )
        self.search_settings.add_setting(
            oesp.ConfigSetting[typing.List[str]](
                name="extra_stopwords",
                default=[],
                description_lines=[
                    "Words to ignore in queries and documents, on top of the "
                    + "built-in list.  Changing this rebuilds the index in "
                    + "memory on every search."
                ],
                include_in_argparse=False,
            )
        )

        ###########################################################
        # Classifier Settings
        #  suffix overrides are only settable from the config file

        self.classifier_settings = oesp.ConfigSettingGroup(
            "Classifier", commands=["crawl"]
        )
        self.setting_groups.append(self.classifier_settings)

        self.classifier_settings.add_setting(
            oesp.ConfigSetting[str](
                name="suffix_table",
                default="",
                description_lines=[
                    "YAML file of suffix overrides, with 'attachments' mapping "
                    + "class names to suffix lists and 'pages' listing page "
                    + "suffixes."
                ],
                metavar="FILE",
            )
        )
        self.classifier_settings.add_setting(
            oesp.ConfigSetting[oesp.SettingDictType](
                name="attachment_suffixes",
                default={},
                description_lines=[
                    "Extra attachment suffixes, as a mapping of class name to "
                    + "a list of suffixes.  Applied after suffix_table.",
                ],
                include_in_argparse=False,
            )
        )
        self.classifier_settings.add_setting(
            oesp.ConfigSetting[typing.List[str]](
                name="page_suffixes",
                default=[],
                description_lines=[
                    "Extra suffixes to crawl as pages.  Applied after "
                    + "suffix_table."
                ],
                include_in_argparse=False,
            )
        )

        ###########################################################
        # Fixture Generation Settings

        self.fixture_gen_settings = oesp.ConfigSettingGroup(
            "Fixture Generation", commands=["fixture gen"]
        )
        self.setting_groups.append(self.fixture_gen_settings)

        self.fixture_gen_settings.add_setting(
            oesp.ConfigSetting[str](
                name="fixture_spec",
                default="",
                description_lines=[
                    "YAML or JSON file describing the board to generate.  "
                    + "Without one, a 200-page board is generated."
                ],
                cli_args=["--spec"],
                metavar="FILE",
            )
        )
        self.fixture_gen_settings.add_setting(
            oesp.ConfigSetting[str](
                name="fixture_out",
                default="",
                description_lines=["Directory to write the board into."],
                cli_args=["--out"],
                metavar="DIR",
            )
        )
        self.fixture_gen_settings.add_setting(
            oesp.ConfigSetting[int](
                name="fixture_seed",
                default=-1,
                description_lines=[
                    "Random seed, overriding the one in the spec file.  "
                    + "-1 keeps the spec's."
                ],
                cli_args=["--seed"],
            )
        )

        ###########################################################
        # Fixture Server Settings

        self.fixture_serve_settings = oesp.ConfigSettingGroup(
            "Fixture Server", commands=["fixture serve"]
        )
        self.setting_groups.append(self.fixture_serve_settings)

        self.fixture_serve_settings.add_setting(
            oesp.ConfigSetting[str](
                name="serve_dir",
                default="",
                description_lines=[
                    "Directory to serve.  A generated fixture directory "
                    + "serves its site/ subdirectory."
                ],
                positional=True,
                metavar="dir",
            )
        )
        self.fixture_serve_settings.add_setting(
            oesp.ConfigSetting[int](
                name="port",
                default=8000,
                description_lines=["Port to listen on, 0 for any free port."],
            )
        )
        self.fixture_serve_settings.add_setting(
            oesp.ConfigSetting[str](
                name="host",
                default="127.0.0.1",
                description_lines=["Address to listen on."],
            )
        )

        ###########################################################
        # Evaluation Settings

        self.evaluation_settings = oesp.ConfigSettingGroup(
            "Evaluation", commands=["evaluate"]
        )
        self.setting_groups.append(self.evaluation_settings)

        self.evaluation_settings.add_setting(
            oesp.ConfigSetting[str](
                name="ground_truth",
                default="",
                description_lines=["ground_truth.json of a generated fixture."],
                metavar="FILE",
            )
        )
        self.evaluation_settings.add_setting(
            oesp.ConfigSetting[str](
                name="base_url",
                default="",
                description_lines=[
                    "URL the fixture was served at when it was crawled.  "
                    + "Defaults to the scheme and host of the stored pages."
                ],
            )
        )

    META_INSTRUCTION = (
        "\n\n"
        + "# " * 30
        + textwrap.dedent(
            """
            # Please have a look at the --help output for a description of
            # each subcommand.  Settings in this file apply to every
            # subcommand that uses them.
            #
            #  e.g. boardcrawl --generate-config > config.yml
            #       boardcrawl crawl http://board.example.edu/ --out store
            """
        )
    )

    def write_to_stream(self, out_stream) -> None:
        oesp.write_to_stream(self.setting_groups, out_stream)

    def _config_file_from_args(
        self, args: typing.Optional[typing.List[str]]
    ) -> typing.Tuple[str, bool]:
        """
        Finds -c/--config in the raw arguments, since config.yml is read
        before argparse runs.

        Returns the file name and whether it is the default one.
        """
        config_setting = self.general_settings.get_setting("config")
        flags = set(config_setting.cli_args)
        args = args or []
        for position, arg in enumerate(args):
            if arg in flags and position + 1 < len(args):
                return (args[position + 1], False)
            for flag in flags:
                if flag.startswith("--") and arg.startswith(flag + "="):
                    return (arg[len(flag) + 1 :], False)
        return (config_setting.default, True)

    def load(
        self,
        cli_args: typing.List[str],
        config_file: typing.Optional[str] = None,
    ) -> None:
        """
        Load the config from the command line arguments and config file.

        raises SettingsError if a specific configuration file was
        requested but it could not be read.  Invalid command line
        arguments make argparse print usage and exit with status 2.
        """

        is_default = False
        if config_file is None:
            config_file, is_default = self._config_file_from_args(cli_args)

        try:
            self.arg_parser, self.command = oesp.load(
                cli_args=cli_args,
                setting_groups=self.setting_groups,
                config_file=config_file,
                raise_if_file_missing=not is_default,
                commands=self.COMMANDS,
            )
        except oesp.ConfigFileError as err:
            msg = f"Could not load config file {os.path.abspath(config_file)} ({err})"
            raise SettingsError(msg, err) from err

    def print_help(self):
        """
        Prints CLI usage information to STDOUT.
        """
        if self.arg_parser is None:
            raise ValueError("print_help called before load")

        print(self.arg_parser.format_help())
        print(
            _console_wrapped(
                "Exit codes: 0 ok, 2 input error, 3 query with no searchable "
                + "words, 4 verify found problems.  Additional settings can "
                + "be set in config.yml.  Use the --generate-config option to "
                + "print a new copy of this file to STDOUT."
            )
        )

    ###########################################################
    # typed views of the settings, for the runtime

    def seed_page(self) -> graph_model.PageId:
        seed_url = self.crawl_settings.get_str("seed_url")
        if not seed_url:
            raise SettingsError("crawl needs a seed URL")
        seed = scanner.normalize_url("", seed_url)
        if isinstance(seed, scanner.NotFetchableUrl):
            raise SettingsError(f"Bad seed URL {seed_url!r}: {seed.reason}")
        return seed

    def crawl_config(self) -> crawler.CrawlConfig:
        delay_ms = self.crawl_settings.get_float("delay_ms")
        if not math.isfinite(delay_ms) or delay_ms < 0:
            raise SettingsError(f"--delay must be a finite number >= 0, got {delay_ms}")
        fetch_timeout = self.crawl_settings.get_float("fetch_timeout")
        if not math.isfinite(fetch_timeout) or fetch_timeout <= 0:
            raise SettingsError(
                f"--timeout must be a finite number > 0, got {fetch_timeout}"
            )
        try:
            return crawler.CrawlConfig(
                seed=self.seed_page(),
                scope_to_host=self.crawl_settings.get_str("scope") == "host",
                max_pages=self.crawl_settings.get_int("max_pages"),
                parallelism=self.crawl_settings.get_int("parallelism"),
                per_host_delay=delay_ms / 1000.0,
                fetch_timeout=fetch_timeout,
                respect_robots=bool(self.crawl_settings.get("respect_robots")),
            )
        except crawler.CrawlError as err:
            raise SettingsError(str(err), err) from err

    def rank_config(self) -> ranker.RankConfig:
        try:
            return ranker.RankConfig(
                d=self.rank_settings.get_float("d"),
                epsilon=self.rank_settings.get_float("epsilon"),
                max_iterations=self.rank_settings.get_int("max_iterations"),
            )
        except ranker.RankError as err:
            raise SettingsError(str(err), err) from err

    def suffix_table(self) -> classifier.SuffixTable:
        table = classifier.SuffixTable.default()
        try:
            filename = self.classifier_settings.get_str("suffix_table")
            if filename:
                table = classifier.load_suffix_table(filename, table)
            extra_classes = self.classifier_settings.get("attachment_suffixes")
            extra_pages = self.classifier_settings.get_list("page_suffixes")
            if extra_classes or extra_pages:
                table = table.with_overrides(
                    extra_classes, [str(suffix) for suffix in extra_pages]
                )
        except classifier.SuffixTableError as err:
            raise SettingsError(str(err), err) from err
        return table

    def store_dir(self) -> str:
        store_dir = self.store_settings.get_str("store")
        if not store_dir:
            raise SettingsError(
                f"{self.command} needs a store directory (--store DIR, or "
                + f"set {self.STORE_ENV_VAR})"
            )
        return store_dir

    def query_text(self) -> str:
        text = self.query_settings.get_str("query")
        if not text or not text.strip():
            raise SettingsError("search needs a query")
        return text

    def top_k(self) -> int:
        k = self.search_settings.get_int("k")
        if k < 1:
            raise SettingsError(f"--k must be at least 1, got {k}")
        return k

    def ar_weight(self) -> float:
        weight = self.search_settings.get_float("ar_weight")
        if not math.isfinite(weight) or weight < 0:
            raise SettingsError(f"--lambda must be a finite number >= 0, got {weight}")
        return weight

    def attachment_classes(
        self,
    ) -> typing.Optional[typing.Set[graph_model.AttachmentClass]]:
        names = self.search_settings.get_list("classes")
        if not names:
            return None
        classes = set()
        for name in names:
            try:
                classes.add(graph_model.AttachmentClass(str(name).lower()))
            except ValueError as err:
                raise SettingsError(f"Unknown attachment class {name!r}") from err
        return classes

    def extra_stopwords(self) -> typing.FrozenSet[str]:
        words = self.search_settings.get_list("extra_stopwords")
        return frozenset(str(word).lower() for word in words)

    def validate(self) -> None:
        """
        Checks everything the chosen subcommand will need, so that
        bad input fails before any stage runs.

        raises SettingsError on the first problem found.
        """
        command = self.command
        if command in self.STORE_COMMANDS:
            self.store_dir()
        if command == "crawl":
            self.crawl_config()
            self.rank_config()
            self.suffix_table()
        elif command == "rank":
            self.rank_config()
        elif command == "search":
            self.query_text()
            self.top_k()
            self.ar_weight()
            self.attachment_classes()
        elif command == "evaluate":
            if not self.evaluation_settings.get_str("ground_truth"):
                raise SettingsError("evaluate needs --ground-truth FILE")
            self.top_k()
            self.ar_weight()
        elif command == "fixture gen":
            if not self.fixture_gen_settings.get_str("fixture_out"):
                raise SettingsError("fixture gen needs --out DIR")
        elif command == "fixture serve":
            if not self.fixture_serve_settings.get_str("serve_dir"):
                raise SettingsError("fixture serve needs a directory")
            port = self.fixture_serve_settings.get_int("port")
            if not 0 <= port <= 65535:
                raise SettingsError(f"--port must be in 0..65535, got {port}")
