# -*- coding: utf-8 -*-
"""
shared fixtures: an in-memory site for crawler tests, and a generated
200-page board served over HTTP for end-to-end tests
"""
import datetime
import os
import typing

import pytest

from boardcrawl import crawler
from boardcrawl import fixture
from boardcrawl import http_client
from boardcrawl import ranker
from boardcrawl import runtime

FETCHED_AT = datetime.datetime(2024, 3, 1, 12, 0, tzinfo=datetime.timezone.utc)


def html_page(title: str, *links: typing.Tuple[str, str], body: str = "") -> bytes:
    items = "".join(f'<li><a href="{href}">{text}</a></li>' for href, text in links)
    return (
        f"<html><head><title>{title}</title></head>"
        + f"<body><p>{body}</p><ul>{items}</ul></body></html>"
    ).encode("utf-8")


class FakeSite:
    """
    Serves canned responses to the crawler, and records the order
    in which URLs were requested.
    """

    def __init__(self):
        self.documents: typing.Dict[str, http_client.RawDocument] = {}
        self.requested: typing.List[str] = []

    def add_page(self, url: str, html: bytes, status: int = 200) -> None:
        self.documents[url] = http_client.RawDocument(
            url=url,
            status=status,
            content_type="text/html",
            body=html,
            charset="utf-8",
            fetched_at=FETCHED_AT,
        )

    def add_file(self, url: str, payload: bytes, content_type: str) -> None:
        self.documents[url] = http_client.RawDocument(
            url=url,
            status=200,
            content_type=content_type,
            body=payload,
            charset=None,
            fetched_at=FETCHED_AT,
        )

    async def fetch(self, url: str) -> http_client.RawDocument:
        self.requested.append(url)
        document = self.documents.get(url)
        if document is None:
            raise http_client.HttpStatusError(url, 404)
        return document


@pytest.fixture
def fake_site() -> FakeSite:
    return FakeSite()


class Board:
    """
    A generated fixture board on disk.
    """

    def __init__(self, out_dir: str, truth: fixture.GroundTruth):
        self.out_dir = out_dir
        self.truth = truth

    @property
    def site_dir(self) -> str:
        return os.path.join(self.out_dir, fixture.SITE_DIR)

    @property
    def ground_truth_path(self) -> str:
        return os.path.join(self.out_dir, fixture.GROUND_TRUTH_FILENAME)


@pytest.fixture(scope="session")
def board(tmp_path_factory) -> Board:
    out_dir = str(tmp_path_factory.mktemp("board"))
    spec = fixture.FixtureSpec(seed=0, n_pages=200, n_attachments=500)
    return Board(out_dir, fixture.generate_site(spec, out_dir))


@pytest.fixture(scope="session")
def board_server(board: Board):
    with fixture.FixtureServer(board.site_dir) as server:
        yield server


class CrawledStore:
    def __init__(self, store_dir: str, result: crawler.CrawlResult, base_url: str):
        self.store_dir = store_dir
        self.result = result
        self.base_url = base_url


def crawl_board(
    server: fixture.FixtureServer,
    store_dir: str,
    parallelism: int = 4,
    max_pages: int = 10000,
    rank_config: typing.Optional[ranker.RankConfig] = None,
) -> crawler.CrawlResult:
    config = crawler.CrawlConfig(
        seed=fixture.GroundTruth.page_id(server.base_url, fixture.INDEX_PAGE),
        parallelism=parallelism,
        max_pages=max_pages,
        per_host_delay=0.0,
        fetch_timeout=10.0,
    )
    return runtime.crawl_to_store(config, rank_config or ranker.RankConfig(), store_dir)


@pytest.fixture(scope="session")
def crawled_store(board_server, tmp_path_factory) -> CrawledStore:
    store_dir = str(tmp_path_factory.mktemp("store"))
    result = crawl_board(board_server, store_dir)
    return CrawledStore(store_dir, result, board_server.base_url)
