# -*- coding: utf-8 -*-
"""
tests for loading settings from defaults, config.yml and the command line
"""
import io

import pytest
import ruamel.yaml as ryaml

from boardcrawl import graph_model
from boardcrawl import ranker
from boardcrawl import settings

SEED = "http://board.a.edu/"


@pytest.fixture(autouse=True)
def in_empty_dir(tmp_path, monkeypatch):
    # keep a config.yml in the working directory from leaking in
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(settings.Settings.STORE_ENV_VAR, raising=False)


def loaded(*args: str) -> settings.Settings:
    result = settings.Settings()
    result.load(list(args))
    return result


def test_defaults():
    crawl = loaded("crawl", SEED, "--store", "out")
    assert crawl.command == "crawl"
    config = crawl.crawl_config()
    assert config.seed == graph_model.PageId(SEED)
    assert config.per_host_delay == 0.2
    assert config.parallelism == 4
    assert config.max_pages == 10000
    assert config.scope_to_host
    assert not config.respect_robots
    assert crawl.rank_config() == ranker.RankConfig()
    assert crawl.store_dir() == "out"
    crawl.validate()


def test_command_line_values():
    crawl = loaded(
        "crawl",
        SEED,
        "--out",
        "out",
        "--max-pages",
        "5",
        "--parallelism",
        "1",
        "--delay",
        "0",
        "--scope",
        "any",
        "--d",
        "0.5",
        "--respect-robots",
    )
    config = crawl.crawl_config()
    assert config.max_pages == 5
    assert config.parallelism == 1
    assert config.per_host_delay == 0.0
    assert not config.scope_to_host
    assert config.respect_robots
    assert crawl.rank_config().d == 0.5


def test_nested_commands():
    gen = loaded("fixture", "gen", "--out", "board", "--seed", "3")
    assert gen.command == "fixture gen"
    assert gen.fixture_gen_settings.get_str("fixture_out") == "board"
    assert gen.fixture_gen_settings.get_int("fixture_seed") == 3
    gen.validate()

    serve = loaded("fixture", "serve", "board", "--port", "0")
    assert serve.command == "fixture serve"
    assert serve.fixture_serve_settings.get_str("serve_dir") == "board"


def test_no_command():
    assert loaded().command is None


def test_config_file_is_overridden_by_the_command_line(tmp_path):
    (tmp_path / "config.yml").write_text(
        "crawl:\n"
        + "  max_pages: 3\n"
        + "  delay_ms: 5\n"
        + "rank:\n"
        + "  d: 0.5\n"
        + "search:\n"
        + "  k: 7\n"
        + "  extra_stopwords: [Notice]\n",
        encoding="utf-8",
    )
    crawl = loaded("crawl", SEED, "--store", "out")
    assert crawl.crawl_config().max_pages == 3
    assert crawl.crawl_config().per_host_delay == 0.005
    assert crawl.rank_config().d == 0.5

    crawl = loaded("crawl", SEED, "--store", "out", "--max-pages", "4")
    assert crawl.crawl_config().max_pages == 4

    search = loaded("search", "budget", "--store", "out")
    assert search.top_k() == 7
    assert search.extra_stopwords() == frozenset(["notice"])


def test_explicit_config_file(tmp_path):
    path = tmp_path / "other.yml"
    path.write_text("search:\n  ar_weight: 2\n", encoding="utf-8")
    search = loaded("-c", str(path), "search", "budget", "--store", "out")
    assert search.ar_weight() == 2.0
    joined = loaded(f"--config={path}", "search", "budget", "--store", "out")
    assert joined.ar_weight() == 2.0

    with pytest.raises(settings.SettingsError):
        loaded("-c", str(tmp_path / "missing.yml"), "verify", "--store", "out")

    path.write_text("- not\n- a mapping\n", encoding="utf-8")
    with pytest.raises(settings.SettingsError):
        loaded("-c", str(path), "verify", "--store", "out")


@pytest.mark.parametrize(
    "text",
    [
        "crawl:\n  scope: everywhere\n",
        "crawl:\n  respect_robots: maybe\n",
        "crawl:\n  max_pages: lots\n",
        "classifier:\n  attachment_suffixes: [odt]\n",
        "rank: 0.5\n",
    ],
)
def test_config_values_must_fit_their_settings(tmp_path, text):
    path = tmp_path / "bad.yml"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(settings.SettingsError):
        loaded("-c", str(path), "verify", "--store", "out")


def test_config_strings_are_converted(tmp_path):
    path = tmp_path / "strings.yml"
    path.write_text(
        "crawl:\n  respect_robots: 'yes'\n  max_pages: '12'\n"
        + "rank:\n  epsilon: 1e-6\n"
        + "search:\n  classes: text\n",
        encoding="utf-8",
    )
    crawl = loaded("-c", str(path), "crawl", SEED, "--store", "out")
    assert crawl.crawl_config().respect_robots
    assert crawl.crawl_config().max_pages == 12
    assert crawl.rank_config().epsilon == 1e-6
    search = loaded("-c", str(path), "search", "budget", "--store", "out")
    assert search.attachment_classes() == {graph_model.AttachmentClass.TEXT}


def test_store_from_environment(monkeypatch):
    monkeypatch.setenv(settings.Settings.STORE_ENV_VAR, "/data/board")
    assert loaded("verify").store_dir() == "/data/board"
    assert loaded("verify", "--store", "here").store_dir() == "here"


def test_suffix_overrides_from_config(tmp_path):
    (tmp_path / "config.yml").write_text(
        "classifier:\n"
        + "  attachment_suffixes:\n"
        + "    document: [odt]\n"
        + "  page_suffixes: [cfm]\n",
        encoding="utf-8",
    )
    table = loaded("crawl", SEED, "--store", "out").suffix_table()
    assert table.attachment_class("odt") == graph_model.AttachmentClass.DOCUMENT
    assert table.is_page_suffix("cfm")


def test_search_classes():
    search = loaded(
        "search", "budget", "--store", "out", "--class", "Document", "text"
    )
    assert search.attachment_classes() == {
        graph_model.AttachmentClass.DOCUMENT,
        graph_model.AttachmentClass.TEXT,
    }
    assert loaded("search", "budget", "--store", "out").attachment_classes() is None


@pytest.mark.parametrize(
    "args",
    [
        ["crawl", "mailto:office@board.a.edu", "--store", "out"],
        ["crawl", "not a url", "--store", "out"],
        ["crawl", "--store", "out"],
        ["crawl", SEED],
        ["crawl", SEED, "--store", "out", "--parallelism", "0"],
        ["crawl", SEED, "--store", "out", "--delay", "-1"],
        ["crawl", SEED, "--store", "out", "--delay", "nan"],
        ["crawl", SEED, "--store", "out", "--timeout", "0"],
        ["crawl", SEED, "--store", "out", "--timeout", "inf"],
        ["crawl", SEED, "--store", "out", "--d", "1.5"],
        ["crawl", SEED, "--store", "out", "--suffix-table", "missing.yml"],
        ["rank", "--store", "out", "--epsilon", "0"],
        ["search", "--store", "out"],
        ["search", "budget", "--store", "out", "--k", "0"],
        ["search", "budget", "--store", "out", "--lambda", "-1"],
        ["search", "budget", "--store", "out", "--lambda", "nan"],
        ["search", "budget", "--store", "out", "--lambda", "inf"],
        ["search", "budget", "--store", "out", "--class", "video"],
        ["evaluate", "--store", "out"],
        ["fixture", "gen"],
        ["fixture", "serve"],
        ["fixture", "serve", "board", "--port", "70000"],
        ["verify"],
    ],
)
def test_validation_rejects(args):
    with pytest.raises(settings.SettingsError):
        loaded(*args).validate()


def test_unknown_flag_exits_like_argparse():
    with pytest.raises(SystemExit) as info:
        loaded("search", "budget", "--no-such-flag")
    assert info.value.code == 2


def test_generated_config_loads_back(tmp_path):
    crawl = loaded("crawl", SEED, "--store", "out", "--max-pages", "7", "--d", "0.6")
    stream = io.StringIO()
    crawl.write_to_stream(stream)
    text = stream.getvalue()

    data = ryaml.YAML(typ="safe").load(text)
    assert data["crawl"]["max_pages"] == 7
    assert "query" not in data
    assert "general_settings" not in data

    path = tmp_path / "generated.yml"
    path.write_text(text, encoding="utf-8")
    again = loaded("-c", str(path), "crawl", SEED, "--store", "out")
    assert again.crawl_config().max_pages == 7
    assert again.rank_config().d == 0.6
