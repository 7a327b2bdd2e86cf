# -*- coding: utf-8 -*-
"""
tests for log formatting
"""
import io
import logging

from boardcrawl import fancy_logger


class FakeTerminal(io.StringIO):
    def isatty(self) -> bool:
        return True


def test_plain_stream_gets_no_colors():
    stream = io.StringIO()
    fancy_logger.init_logging("info", stream)
    fancy_logger.get().info("fetched %s", "index.html")
    fancy_logger.get().debug("hidden")
    text = stream.getvalue()
    assert "INFO fetched index.html" in text
    assert "\033[" not in text
    assert "hidden" not in text


def test_terminal_gets_colors_unless_disabled(monkeypatch):
    monkeypatch.delenv("NO_COLOR", raising=False)
    terminal = FakeTerminal()
    fancy_logger.init_logging(logging.WARNING, terminal)
    fancy_logger.get().warning("slow host")
    assert fancy_logger.paint("yellow", "slow host") in terminal.getvalue()

    monkeypatch.setenv("NO_COLOR", "1")
    terminal = FakeTerminal()
    fancy_logger.init_logging(logging.WARNING, terminal)
    fancy_logger.get().warning("slow host")
    assert "\033[" not in terminal.getvalue()


def test_reinitializing_replaces_the_handler():
    first = io.StringIO()
    second = io.StringIO()
    fancy_logger.init_logging("info", first)
    fancy_logger.init_logging("info", second)
    fancy_logger.get().info("once")
    assert first.getvalue() == ""
    assert second.getvalue().count("once") == 1
