# -*- coding: utf-8 -*-
"""
end-to-end tests: generate a board, serve it, crawl it over HTTP,
and check the store against the board's ground truth
"""
import os
import shutil
import time

from conftest import crawl_board
import numpy as np
import pytest

from boardcrawl import fixture
from boardcrawl import graph_model
from boardcrawl import ranker
from boardcrawl import runtime
from boardcrawl import search
from boardcrawl import store


def copy_store(crawled_store, tmp_path) -> str:
    target = str(tmp_path / "copy")
    shutil.copytree(crawled_store.store_dir, target)
    return target


def read_manifest(store_dir: str) -> bytes:
    with open(os.path.join(store_dir, store.MANIFEST_FILENAME), "rb") as file:
        return file.read()


def test_crawl_finds_exactly_the_declared_board(board, crawled_store):
    truth = board.truth
    base_url = crawled_store.base_url
    stored = store.BoardStore(crawled_store.store_dir)

    assert set(stored.manifest.pages) == {
        fixture.GroundTruth.page_id(base_url, page.path) for page in truth.pages
    }
    assert set(stored.manifest.attachments) == {
        fixture.GroundTruth.attachment_id(base_url, a.path) for a in truth.attachments
    }
    assert stored.manifest.class_counts() == truth.class_counts()

    for class_name, count in truth.class_counts().items():
        class_dir = stored.path(f"{store.ATTACHMENTS_DIR}/{class_name}")
        assert len(os.listdir(class_dir)) == count

    stats = crawled_store.result.stats
    assert stats.pages_fetched == truth.page_count
    assert stats.attachment_payloads_fetched == truth.attachment_count
    assert stats.fetch_errors == 0


def test_every_record_round_trips(board, crawled_store, tmp_path):
    stored = store.BoardStore(crawled_store.store_dir)
    declared = {
        fixture.GroundTruth.attachment_id(crawled_store.base_url, a.path): a
        for a in board.truth.attachments
    }
    for attachment_id in sorted(stored.manifest.attachments):
        record = stored.read_attachment_record(attachment_id)
        assert record.payload_sha256 == declared[attachment_id].sha256
        assert record.attachment_class == declared[attachment_id].attachment_class

        relative = store.write_attachment_record(str(tmp_path), record)
        assert store.read_attachment_record(str(tmp_path / relative)) == record


def test_crawled_store_verifies_clean(crawled_store):
    assert store.BoardStore(crawled_store.store_dir).verify() == []


def test_attachrank_is_the_containing_pages_pagerank(crawled_store):
    stored = store.BoardStore(crawled_store.store_dir)
    pagerank = {
        page_id: entry.pagerank for page_id, entry in stored.manifest.pages.items()
    }
    shared = 0
    for attachment_id in stored.manifest.attachments:
        header = stored.read_attachment_header(attachment_id)
        expected = max(pagerank[page] for page in header.containing_pages)
        # exact, not approximate
        assert header.ar == expected
        assert stored.manifest.attachments[attachment_id].ar == header.ar
        if len(header.containing_pages) > 1:
            shared += 1
    assert shared > 0


def test_stored_ranks_match_a_dense_solve(crawled_store):
    stored = store.BoardStore(crawled_store.store_dir)
    graph = graph_model.seal_graph(stored.load_pages())
    nodes = sorted(graph.nodes)
    index = {page_id: i for i, page_id in enumerate(nodes)}
    matrix = np.zeros((len(nodes), len(nodes)))
    for source, targets in graph.edges.items():
        for target in targets:
            matrix[index[target], index[source]] += 1.0 / len(targets)
    d = stored.manifest.rank_config.d
    solution = np.linalg.solve(
        np.eye(len(nodes)) - d * matrix, np.full(len(nodes), 1.0 - d)
    )
    for page_id, entry in stored.manifest.pages.items():
        assert entry.pagerank == pytest.approx(solution[index[page_id]], abs=1e-6)


def test_rerank_is_deterministic(crawled_store, tmp_path):
    copy = copy_store(crawled_store, tmp_path)
    runtime.rerank_store(copy, ranker.RankConfig())
    assert read_manifest(copy) == read_manifest(crawled_store.store_dir)
    assert store.BoardStore(copy).verify() == []


def test_rerank_with_another_damping_rewrites_only_headers(crawled_store, tmp_path):
    copy = copy_store(crawled_store, tmp_path)
    before = store.BoardStore(copy)
    records = {
        attachment_id: before.read_attachment_record(attachment_id)
        for attachment_id in before.manifest.attachments
    }

    runtime.rerank_store(copy, ranker.RankConfig(d=0.5))
    after = store.BoardStore(copy)
    assert after.manifest.rank_config.d == 0.5
    assert after.verify() == []

    changed = 0
    for attachment_id, old in records.items():
        new = after.read_attachment_record(attachment_id)
        assert new.payload == old.payload
        assert new.payload_sha256 == old.payload_sha256
        assert new.anchor_text == old.anchor_text
        if new.ar != old.ar:
            changed += 1
    assert changed > 0


def test_lexical_order_and_attachrank_ties(crawled_store):
    index = search.index_for_store(store.BoardStore(crawled_store.store_dir))
    for text in ("budget", "meeting schedule", "report policy", "notice"):
        lexical = search.query(index, text, k=1000, ar_weight=0.0)
        assert len(lexical) > 0
        assert lexical.ids() == [
            row.attachment_id
            for row in sorted(
                lexical.rows, key=lambda row: (-row.lexical_score, row.attachment_id)
            )
        ]

        ranked = search.query(index, text, k=1000, ar_weight=1.0)
        for first, second in zip(ranked.rows, ranked.rows[1:]):
            if first.lexical_score == second.lexical_score:
                assert first.ar >= second.ar


def test_rerank_and_queries_are_fast(crawled_store, tmp_path):
    copy = copy_store(crawled_store, tmp_path)
    start = time.perf_counter()
    runtime.rerank_store(copy, ranker.RankConfig())
    assert time.perf_counter() - start < 1.0

    index = search.index_for_store(store.BoardStore(copy))
    for word in fixture.BOARD_WORDS:
        start = time.perf_counter()
        search.query(index, word)
        assert time.perf_counter() - start < 0.05


def test_max_pages_limits_the_store(board_server, tmp_path):
    store_dir = str(tmp_path / "five")
    crawl_board(board_server, store_dir, max_pages=5)
    stored = store.BoardStore(store_dir)
    assert len(stored.manifest.pages) == 5
    assert stored.verify() == []


def test_single_worker_crawls_are_repeatable(board_server, tmp_path):
    first = str(tmp_path / "first")
    second = str(tmp_path / "second")
    crawl_board(board_server, first, parallelism=1)
    crawl_board(board_server, second, parallelism=1)
    assert read_manifest(first) == read_manifest(second)


def test_recrawl_replaces_the_store(board_server, crawled_store, tmp_path):
    copy = copy_store(crawled_store, tmp_path)
    crawl_board(board_server, copy, max_pages=3)
    stored = store.BoardStore(copy)
    assert len(stored.manifest.pages) == 3
    assert stored.verify() == []


def evaluate_seed(seed: int, tmp_path) -> runtime.Evaluation:
    out_dir = str(tmp_path / f"board-{seed}")
    spec = fixture.FixtureSpec(
        seed=seed,
        n_pages=200,
        n_attachments=100,
        relevance_plan=fixture.RelevancePlan.from_dict({"queries": 10}),
    )
    truth = fixture.generate_site(spec, out_dir)
    store_dir = str(tmp_path / f"store-{seed}")
    with fixture.FixtureServer(fixture.site_directory(out_dir)) as server:
        crawl_board(server, store_dir)
        base_url = server.base_url
    return runtime.evaluate_store(
        store.BoardStore(store_dir), truth, k=10, ar_weight=1.0, base_url=base_url
    )


def test_attachrank_improves_precision(tmp_path):
    evaluations = [evaluate_seed(seed, tmp_path) for seed in (0, 1, 2)]
    for evaluation in evaluations:
        assert len(evaluation.rows) == 10
        assert evaluation.mean_ranked >= evaluation.mean_lexical
        assert all(0.0 <= row.ranked_precision <= 1.0 for row in evaluation.rows)
    improved = [e for e in evaluations if e.mean_ranked > e.mean_lexical]
    assert len(improved) >= 2
