# -*- coding: utf-8 -*-
"""
Runs the pipeline stages against a store: crawl, rank, search,
verify and evaluate.  Each stage is also available as a plain
function, so it can be driven without a Settings object.
"""

import asyncio
import typing
import urllib.parse

from boardcrawl import classifier
from boardcrawl import crawler
from boardcrawl import fancy_logger
from boardcrawl import fixture
from boardcrawl import graph_model
from boardcrawl import http_client
from boardcrawl import ranker
from boardcrawl import search
from boardcrawl import settings
from boardcrawl import store


class BoardcrawlRuntimeError(Exception):
    """
    Raised when a stage can't go on, e.g. a store whose pages don't
    account for its attachments.
    """


async def _crawl_over_http(
    config: crawler.CrawlConfig,
    suffix_table: classifier.SuffixTable,
) -> crawler.CrawlResult:
    async with http_client.PoliteHttpClient(
        parallelism=config.parallelism,
        per_host_delay=config.per_host_delay,
        fetch_timeout=config.fetch_timeout,
        respect_robots=config.respect_robots,
    ) as client:
        return await crawler.crawl(config, client.fetch_page, suffix_table)


def rank_pages(
    pages: typing.Iterable[graph_model.PageRecord],
    config: ranker.RankConfig,
) -> typing.Tuple[ranker.RankVector, ranker.AttachRankTable]:
    graph = graph_model.seal_graph(pages)
    ranks = ranker.compute_pagerank(graph, config)
    return ranks, ranker.compute_attachrank(graph, ranks)


def _finish_store(
    board: store.BoardStore,
    ranks: ranker.RankVector,
    config: ranker.RankConfig,
    stopwords: typing.Optional[typing.AbstractSet[str]],
) -> None:
    """
    Writes the manifest, then the search index built from it.
    """
    board.set_ranks(ranks, config)
    board.flush()
    index = search.build_index(board, stopwords)
    search.save_index(
        index, board.path(store.INDEX_FILENAME), board.manifest_digest()
    )


def store_crawl(
    result: crawler.CrawlResult,
    store_dir: str,
    rank_config: ranker.RankConfig,
    stopwords: typing.Optional[typing.AbstractSet[str]] = None,
) -> store.BoardStore:
    """
    Replaces whatever the store held with the crawl's pages and
    attachments, ranked with rank_config.  Attachments whose payload
    couldn't be fetched are left out.
    """
    board = store.BoardStore(store_dir, create=True)
    board.clear()
    for page in result.pages:
        board.store_page(page)

    ranks, table = rank_pages(result.pages, rank_config)
    skipped = 0
    for attachment_id in table:
        found = result.attachments.get(attachment_id)
        if found is None or found.payload is None:
            skipped += 1
            continue
        entry = table[attachment_id]
        board.write_attachment_record(
            store.AttachmentRecord(
                attachment_id=attachment_id,
                attachment_class=found.attachment_class,
                ar=entry.ar,
                containing_pages=entry.containing_pages,
                anchor_text=found.anchor_text,
                fetched_at=found.payload.fetched_at,
                payload=found.payload.body,
            )
        )
    if skipped:
        fancy_logger.get().warning(
            "Left %d attachment(s) without a payload out of the store", skipped
        )

    _finish_store(board, ranks, rank_config, stopwords)
    fancy_logger.get().info(
        "Stored %d page(s) and %d attachment(s) in %s",
        len(board.manifest.pages),
        len(board.manifest.attachments),
        store_dir,
    )
    return board


def crawl_to_store(
    crawl_config: crawler.CrawlConfig,
    rank_config: ranker.RankConfig,
    store_dir: str,
    suffix_table: typing.Optional[classifier.SuffixTable] = None,
    stopwords: typing.Optional[typing.AbstractSet[str]] = None,
) -> crawler.CrawlResult:
    """
    Crawls over HTTP from crawl_config.seed and writes the ranked
    result to store_dir.

    Raises crawler.CrawlError if the seed can't be fetched, in which
    case the store is left as it was.
    """
    if suffix_table is None:
        suffix_table = classifier.SuffixTable.default()
    result = asyncio.run(_crawl_over_http(crawl_config, suffix_table))
    store_crawl(result, store_dir, rank_config, stopwords)
    return result


def rerank_store(
    store_dir: str,
    rank_config: ranker.RankConfig,
    stopwords: typing.Optional[typing.AbstractSet[str]] = None,
) -> ranker.RankVector:
    """
    Recomputes every rank in an existing store from its stored pages
    and rewrites the attachment headers.  Payloads are copied as is.
    """
    board = store.BoardStore(store_dir)
    ranks, table = rank_pages(board.load_pages(), rank_config)
    for attachment_id in sorted(board.manifest.attachments):
        if attachment_id not in table:
            raise BoardcrawlRuntimeError(
                f"No stored page contains attachment {attachment_id}"
            )
        entry = table[attachment_id]
        record = board.read_attachment_record(attachment_id)
        board.write_attachment_record(
            record.with_rank(entry.ar, entry.containing_pages)
        )
    _finish_store(board, ranks, rank_config, stopwords)
    fancy_logger.get().info(
        "Reranked %d page(s) and %d attachment(s) with %s (%d iterations)",
        len(ranks),
        len(board.manifest.attachments),
        rank_config,
        ranks.iterations_used,
    )
    return ranks


def store_base_url(board: store.BoardStore) -> str:
    """
    Returns scheme://host/ of the stored pages.
    """
    if not board.manifest.pages:
        raise BoardcrawlRuntimeError("The store has no pages")
    first = min(board.manifest.pages)
    parts = urllib.parse.urlsplit(first.value)
    return f"{parts.scheme}://{parts.netloc}/"


class QueryEvaluation:
    """
    Precision of one planted query, without and with AttachRank.
    """

    def __init__(self, query: str, lexical_precision: float, ranked_precision: float):
        self.query = query
        self.lexical_precision = lexical_precision
        self.ranked_precision = ranked_precision


class Evaluation:
    """
    Precision@k of every planted query, scored by lexical match alone
    and with AttachRank weighted by ar_weight.
    """

    def __init__(self, k: int, ar_weight: float, rows: typing.List[QueryEvaluation]):
        self.k = k
        self.ar_weight = ar_weight
        self.rows = rows

    @property
    def mean_lexical(self) -> float:
        if not self.rows:
            return 0.0
        return sum(row.lexical_precision for row in self.rows) / len(self.rows)

    @property
    def mean_ranked(self) -> float:
        if not self.rows:
            return 0.0
        return sum(row.ranked_precision for row in self.rows) / len(self.rows)

    def format_table(self) -> str:
        width = max([len("query")] + [len(row.query) for row in self.rows])
        lines = [
            f"{'query':<{width}}  {'lambda=0':>9}  "
            + f"{'lambda=' + format(self.ar_weight, 'g'):>9}"
        ]
        for row in self.rows:
            lines.append(
                f"{row.query:<{width}}  {row.lexical_precision:>9.2f}  "
                + f"{row.ranked_precision:>9.2f}"
            )
        lines.append(
            f"{'mean P@' + str(self.k):<{width}}  {self.mean_lexical:>9.3f}  "
            + f"{self.mean_ranked:>9.3f}"
        )
        return "\n".join(lines) + "\n"


def evaluate_store(
    board: store.BoardStore,
    truth: fixture.GroundTruth,
    k: int = 10,
    ar_weight: float = 1.0,
    base_url: str = "",
    stopwords: typing.Optional[typing.AbstractSet[str]] = None,
) -> Evaluation:
    """
    Runs every planted query of a fixture against the store.
    """
    if not truth.queries:
        raise BoardcrawlRuntimeError("The ground truth has no planted queries")
    if not base_url:
        base_url = store_base_url(board)
    index = search.index_for_store(board, stopwords)

    rows = []
    for planted in truth.queries:
        relevant = truth.relevant_ids(base_url, planted)
        lexical = search.query(index, planted.query, k=k, ar_weight=0.0)
        ranked = search.query(index, planted.query, k=k, ar_weight=ar_weight)
        rows.append(
            QueryEvaluation(
                planted.query,
                search.precision_at_k(lexical, relevant, k),
                search.precision_at_k(ranked, relevant, k),
            )
        )
    return Evaluation(k, ar_weight, rows)


class Runtime:
    """
    Runs one subcommand's stage with the loaded settings.  It should
    be created once the settings have been validated.
    """

    def __init__(self, boardcrawl_settings: settings.Settings):
        self.settings = boardcrawl_settings

    def _stopwords(self) -> typing.Optional[typing.FrozenSet[str]]:
        extra = self.settings.extra_stopwords()
        if not extra:
            return None
        return search.DEFAULT_STOPWORDS | extra

    def crawl(self) -> crawler.CrawlResult:
        return crawl_to_store(
            self.settings.crawl_config(),
            self.settings.rank_config(),
            self.settings.store_dir(),
            suffix_table=self.settings.suffix_table(),
            stopwords=self._stopwords(),
        )

    def rank(self) -> ranker.RankVector:
        return rerank_store(
            self.settings.store_dir(),
            self.settings.rank_config(),
            stopwords=self._stopwords(),
        )

    def search(self) -> search.QueryResult:
        board = store.BoardStore(self.settings.store_dir())
        index = search.index_for_store(board, self._stopwords())
        return search.query(
            index,
            self.settings.query_text(),
            k=self.settings.top_k(),
            ar_weight=self.settings.ar_weight(),
            classes=self.settings.attachment_classes(),
        )

    def verify(self) -> typing.List[str]:
        return store.BoardStore(self.settings.store_dir()).verify()

    def evaluate(self) -> Evaluation:
        board = store.BoardStore(self.settings.store_dir())
        evaluation_settings = self.settings.evaluation_settings
        truth = fixture.GroundTruth.load(evaluation_settings.get_str("ground_truth"))
        return evaluate_store(
            board,
            truth,
            k=self.settings.top_k(),
            ar_weight=self.settings.ar_weight(),
            base_url=evaluation_settings.get_str("base_url"),
            stopwords=self._stopwords(),
        )

    def generate_fixture(self) -> fixture.GroundTruth:
        gen_settings = self.settings.fixture_gen_settings
        spec_file = gen_settings.get_str("fixture_spec")
        spec = fixture.FixtureSpec.from_file(spec_file) if spec_file else None
        data = spec.as_dict() if spec is not None else {}
        seed = gen_settings.get_int("fixture_seed")
        if seed >= 0:
            data["seed"] = seed
        return fixture.generate_site(
            fixture.FixtureSpec.from_dict(data), gen_settings.get_str("fixture_out")
        )

    def fixture_server(self) -> fixture.FixtureServer:
        serve_settings = self.settings.fixture_serve_settings
        return fixture.FixtureServer(
            fixture.site_directory(serve_settings.get_str("serve_dir")),
            port=serve_settings.get_int("port"),
            host=serve_settings.get_str("host"),
        )
