# -*- coding: utf-8 -*-
"""
tests for the command line: subcommands, output and exit codes
"""
import json
import os
import shutil

import pytest
import ruamel.yaml as ryaml

from boardcrawl import cli
from boardcrawl import fixture
from boardcrawl import settings
from boardcrawl import store


@pytest.fixture(autouse=True)
def in_empty_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(settings.Settings.STORE_ENV_VAR, raising=False)


def run(*args: str) -> int:
    return cli.run_cli(list(args))


def test_help_exits_zero(capsys):
    assert run("--help") == cli.EXIT_OK
    assert "crawl" in capsys.readouterr().out
    assert run("search", "--help") == cli.EXIT_OK
    assert "--lambda" in capsys.readouterr().out


def test_missing_command_is_an_input_error(capsys):
    assert run() == cli.EXIT_INPUT_ERROR
    assert "a command is required" in capsys.readouterr().err


def test_unknown_flag_is_an_input_error():
    assert run("verify", "--bogus") == cli.EXIT_INPUT_ERROR


def test_generate_config(capsys):
    assert run("--generate-config") == cli.EXIT_OK
    out = capsys.readouterr().out
    data = ryaml.YAML(typ="safe").load(out)
    assert "crawl" in data
    assert "rank" in data
    assert "version" in data


def test_bad_seed_url(tmp_path):
    assert (
        run("crawl", "javascript:void(0)", "--store", str(tmp_path / "s"))
        == cli.EXIT_INPUT_ERROR
    )
    assert not os.path.exists(tmp_path / "s")


def test_unreachable_seed(tmp_path):
    # nothing listens on port 9 of the loopback address
    code = run(
        "crawl",
        "http://127.0.0.1:9/",
        "--store",
        str(tmp_path / "s"),
        "--delay",
        "0",
        "--timeout",
        "2",
    )
    assert code == cli.EXIT_INPUT_ERROR


def test_missing_store(tmp_path):
    assert run("verify", "--store", str(tmp_path / "none")) == cli.EXIT_INPUT_ERROR
    assert (
        run("search", "budget", "--store", str(tmp_path / "none"))
        == cli.EXIT_INPUT_ERROR
    )


def test_crawl_command(board_server, tmp_path, capsys):
    store_dir = str(tmp_path / "s")
    code = run(
        "crawl",
        board_server.url(fixture.INDEX_PAGE),
        "--store",
        store_dir,
        "--max-pages",
        "5",
        "--delay",
        "0",
    )
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "pages fetched:       5" in out
    assert len(store.BoardStore(store_dir).manifest.pages) == 5

    assert run("verify", "--store", store_dir) == cli.EXIT_OK
    assert "store ok" in capsys.readouterr().out


def test_search_command(crawled_store, capsys):
    assert run("search", "budget", "--store", crawled_store.store_dir) == cli.EXIT_OK
    table = capsys.readouterr().out
    assert table.splitlines()[0].split()[:2] == ["#", "final"]

    code = run(
        "search",
        "budget",
        "--store",
        crawled_store.store_dir,
        "--format",
        "records",
        "--k",
        "3",
        "--class",
        "text",
    )
    assert code == cli.EXIT_OK
    records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert 0 < len(records) <= 3
    assert all(record["class"] == "text" for record in records)


def test_stopword_only_query(crawled_store):
    code = run("search", "the of and", "--store", crawled_store.store_dir)
    assert code == cli.EXIT_EMPTY_QUERY


def test_store_from_environment(crawled_store, monkeypatch):
    monkeypatch.setenv(settings.Settings.STORE_ENV_VAR, crawled_store.store_dir)
    assert run("verify") == cli.EXIT_OK


def test_rank_and_verify_findings(crawled_store, tmp_path, capsys):
    copy = str(tmp_path / "copy")
    shutil.copytree(crawled_store.store_dir, copy)

    assert run("rank", "--store", copy, "--d", "0.5") == cli.EXIT_OK
    assert "converged" in capsys.readouterr().out
    assert store.BoardStore(copy).manifest.rank_config.d == 0.5
    assert run("verify", "--store", copy) == cli.EXIT_OK

    board = store.BoardStore(copy)
    entry = next(iter(board.manifest.attachments.values()))
    with open(board.path(entry.path), "ab") as file:
        file.write(b"tampered")
    capsys.readouterr()
    assert run("verify", "--store", copy) == cli.EXIT_VERIFY_FINDINGS
    assert "payload-length" in capsys.readouterr().out


def test_fixture_gen_and_evaluate(tmp_path, capsys):
    spec_path = tmp_path / "board.yml"
    spec_path.write_text(
        "n_pages: 40\n"
        + "n_attachments: 30\n"
        + "relevance_plan:\n"
        + "  queries: 2\n"
        + "  relevant_per_query: 2\n"
        + "  decoys_per_query: 3\n",
        encoding="utf-8",
    )
    out_dir = str(tmp_path / "board")
    code = run("fixture", "gen", "--spec", str(spec_path), "--out", out_dir)
    assert code == cli.EXIT_OK
    assert "2 planted query(ies)" in capsys.readouterr().out
    truth_path = os.path.join(out_dir, fixture.GROUND_TRUTH_FILENAME)
    truth = fixture.GroundTruth.load(truth_path)
    assert truth.spec["seed"] == 0

    store_dir = str(tmp_path / "s")
    with fixture.serve(fixture.site_directory(out_dir)) as server:
        code = run(
            "crawl",
            server.url(fixture.INDEX_PAGE),
            "--store",
            store_dir,
            "--delay",
            "0",
        )
        assert code == cli.EXIT_OK
        base_url = server.base_url
    capsys.readouterr()

    planted = truth.queries[0]
    code = run(
        "search", planted.query, "--store", store_dir, "--format", "records"
    )
    assert code == cli.EXIT_OK
    top = json.loads(capsys.readouterr().out.splitlines()[0])
    assert top["id"] in truth.relevant_ids(base_url, planted)

    code = run("evaluate", "--store", store_dir, "--ground-truth", truth_path)
    assert code == cli.EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["query", "lambda=0", "lambda=1"]
    assert [line.split()[0] for line in lines[1:3]] == [q.query for q in truth.queries]
    assert lines[-1].startswith("mean P@10")


def test_fixture_gen_seed_override(tmp_path):
    out_dir = str(tmp_path / "board")
    assert run("fixture", "gen", "--out", out_dir, "--seed", "9") == cli.EXIT_OK
    truth = fixture.GroundTruth.load(
        os.path.join(out_dir, fixture.GROUND_TRUTH_FILENAME)
    )
    assert truth.spec["seed"] == 9
    assert truth.page_count == 200
    assert not truth.queries


def test_evaluate_without_planted_queries(crawled_store, board):
    code = run(
        "evaluate",
        "--store",
        crawled_store.store_dir,
        "--ground-truth",
        board.ground_truth_path,
    )
    assert code == cli.EXIT_INPUT_ERROR


def test_fixture_serve_stops(board):
    app = cli.Boardcrawl(["fixture", "serve", board.out_dir, "--port", "0"])
    # stop before starting: the serve loop exits on its first check
    app.stop()
    assert app.run() == cli.EXIT_OK
