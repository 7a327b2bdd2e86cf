#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
"""
Command-line entrypoint.

Exit codes:
    0  success
    2  bad input: arguments, config file, seed, store or ground truth
    3  a search query with no searchable words
    4  verify found problems with the store
"""

import signal
import sys
import threading
import typing

import boardcrawl
from boardcrawl import classifier
from boardcrawl import crawler
from boardcrawl import fancy_logger
from boardcrawl import fixture
from boardcrawl import graph_model
from boardcrawl import ranker
from boardcrawl import runtime
from boardcrawl import search
from boardcrawl import settings
from boardcrawl import store

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_EMPTY_QUERY = 3
EXIT_VERIFY_FINDINGS = 4

# failures caused by what the operator gave us, rather than by a bug
INPUT_ERRORS = (
    settings.SettingsError,
    crawler.CrawlError,
    store.StoreError,
    search.SearchError,
    fixture.FixtureError,
    classifier.SuffixTableError,
    graph_model.GraphStructureError,
    ranker.RankError,
    runtime.BoardcrawlRuntimeError,
)


class Boardcrawl:
    """
    Main application class.  Loads settings and runs one subcommand.

    Methods:
        constructor: Loads settings from the command line, environment
            variables, and config file.
        run: Runs the chosen subcommand and returns its exit code.
        stop: Asks a running `fixture serve` to shut down.
    """

    def __init__(self, cli_args: typing.List[str]):
        self.settings = settings.Settings()
        self._stop_serving = threading.Event()

        try:
            self.settings.load(cli_args)
        except settings.SettingsError as err:
            print(str(err), file=sys.stderr)
            raise

        fancy_logger.init_logging(
            level=self.settings.general_settings.get_str("log_level")
        )

    @property
    def command(self) -> typing.Optional[str]:
        return self.settings.command

    def _usage_error(self, message: str) -> int:
        if self.settings.arg_parser is not None:
            self.settings.arg_parser.print_usage(sys.stderr)
        print(f"boardcrawl: error: {message}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    def run(self) -> int:
        """
        Validates the settings for the chosen subcommand, then runs it.
        """
        if self.command is None:
            return self._usage_error("a command is required")
        try:
            self.settings.validate()
        except settings.SettingsError as err:
            return self._usage_error(str(err))

        handlers: typing.Dict[str, typing.Callable[[runtime.Runtime], int]] = {
            "crawl": self.cmd_crawl,
            "rank": self.cmd_rank,
            "search": self.cmd_search,
            "verify": self.cmd_verify,
            "evaluate": self.cmd_evaluate,
            "fixture gen": self.cmd_fixture_gen,
            "fixture serve": self.cmd_fixture_serve,
        }
        fancy_logger.get().debug(
            "boardcrawl %s running '%s'", boardcrawl.__version__, self.command
        )
        try:
            return handlers[self.command](runtime.Runtime(self.settings))
        except search.EmptyQueryError as err:
            fancy_logger.get().error("%s", err)
            return EXIT_EMPTY_QUERY
        except INPUT_ERRORS as err:
            fancy_logger.get().error("%s", err)
            if err.__cause__ is not None:
                fancy_logger.get().error("  caused by: %s", err.__cause__)
            return EXIT_INPUT_ERROR

    def cmd_crawl(self, stage: runtime.Runtime) -> int:
        result = stage.crawl()
        print("\n".join(result.stats.summary_lines()))
        print(f"store:               {self.settings.store_dir()}")
        return EXIT_OK

    def cmd_rank(self, stage: runtime.Runtime) -> int:
        ranks = stage.rank()
        print(
            f"ranked {len(ranks)} page(s) in {ranks.iterations_used} iteration(s), "
            + ("converged" if ranks.converged else "NOT converged")
        )
        return EXIT_OK

    def cmd_search(self, stage: runtime.Runtime) -> int:
        result = stage.search()
        if self.settings.search_settings.get_str("format") == "records":
            sys.stdout.write(search.format_records(result))
        else:
            sys.stdout.write(search.format_table(result))
        return EXIT_OK

    def cmd_verify(self, stage: runtime.Runtime) -> int:
        findings = stage.verify()
        for finding in findings:
            print(finding)
        if findings:
            fancy_logger.get().error("Store has %d problem(s)", len(findings))
            return EXIT_VERIFY_FINDINGS
        print(f"store ok: {self.settings.store_dir()}")
        return EXIT_OK

    def cmd_evaluate(self, stage: runtime.Runtime) -> int:
        sys.stdout.write(stage.evaluate().format_table())
        return EXIT_OK

    def cmd_fixture_gen(self, stage: runtime.Runtime) -> int:
        truth = stage.generate_fixture()
        print(
            f"generated {truth.page_count} page(s), "
            + f"{truth.attachment_count} attachment(s), "
            + f"{len(truth.queries)} planted query(ies)"
        )
        return EXIT_OK

    def cmd_fixture_serve(self, stage: runtime.Runtime) -> int:
        with stage.fixture_server() as server:
            print(f"serving at {server.base_url}, Ctrl-C to stop", flush=True)
            while not self._stop_serving.wait(timeout=0.5):
                pass
        return EXIT_OK

    def stop(self) -> None:
        self._stop_serving.set()


def run_cli(args: typing.Optional[typing.List[str]] = None) -> int:
    """
    Runs boardcrawl from the command line and returns the exit code.

    In addition to the subcommands, this function also handles
    --help and --generate-config.
    """
    if args is None:
        args = sys.argv[1:]

    # create the object and load our settings
    try:
        app = Boardcrawl(args)
    except settings.SettingsError:
        return EXIT_INPUT_ERROR
    except SystemExit as err:
        # argparse exits 0 after --help and 2 on bad arguments
        return err.code if isinstance(err.code, int) else EXIT_OK

    if app.settings.general_settings.get("generate_config"):
        app.settings.write_to_stream(out_stream=sys.stdout)
        if sys.stdout.isatty():
            print(app.settings.META_INSTRUCTION, file=sys.stderr)
        else:
            print("# boardcrawl: config.yml output successfully", file=sys.stderr)
        return EXIT_OK

    def exit_handler(signum, _frame):
        sig_name = signal.Signals(signum).name
        fancy_logger.get().info("Received signal %s, exiting...", sig_name)
        app.stop()

    # signals can only be caught from the main thread
    is_main_thread = threading.current_thread() is threading.main_thread()
    if app.command == "fixture serve" and is_main_thread:
        signal.signal(signal.SIGINT, exit_handler)
        signal.signal(signal.SIGTERM, exit_handler)

    return app.run()


def main():
    sys.excepthook = fancy_logger.excepthook
    sys.exit(run_cli())
