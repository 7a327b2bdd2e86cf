# -*- coding: utf-8 -*-
"""
tests for the attachment index and ranked queries
"""
import datetime
import json
import os

import pytest

from boardcrawl import graph_model
from boardcrawl import ranker
from boardcrawl import search
from boardcrawl import store

PageId = graph_model.PageId
AttachmentId = graph_model.AttachmentId
AttachmentClass = graph_model.AttachmentClass

WHEN = datetime.datetime(2024, 5, 2, tzinfo=datetime.timezone.utc)

SPRING = AttachmentId("http://a.edu/f/spring.doc")
AUTUMN = AttachmentId("http://a.edu/f/autumn.doc")
RULES = AttachmentId("http://a.edu/f/rules.txt")


def make_page(url, title, body, outlinks=(), attachments=()):
    return graph_model.PageRecord(
        page_id=PageId(url),
        title=title,
        body_text=body,
        fetched_at=WHEN,
        http_status=200,
        outlinks=[PageId(link) for link in outlinks],
        attachments=list(attachments),
    )


def build_board(root: str) -> store.BoardStore:
    """
    Two attachments with identical surrounding text, one on a page
    with more in-links than the other.
    """
    pages = [
        make_page(
            "http://a.edu/index.html",
            "Notices",
            "board index",
            ["http://a.edu/1.html", "http://a.edu/2.html", "http://a.edu/3.html"],
        ),
        make_page(
            "http://a.edu/1.html",
            "Exam timetable",
            "exam timetable for spring",
            ["http://a.edu/index.html"],
            [SPRING],
        ),
        make_page(
            "http://a.edu/2.html",
            "Exam timetable",
            "exam timetable for spring",
            attachments=[AUTUMN],
        ),
        make_page(
            "http://a.edu/3.html",
            "Lab notes",
            "lab rules",
            ["http://a.edu/1.html"],
            [RULES],
        ),
    ]
    anchors = {
        SPRING: ("spring timetable", AttachmentClass.DOCUMENT),
        AUTUMN: ("spring timetable", AttachmentClass.DOCUMENT),
        RULES: ("rules", AttachmentClass.TEXT),
    }

    graph = graph_model.seal_graph(pages)
    config = ranker.RankConfig()
    ranks = ranker.compute_pagerank(graph, config)
    table = ranker.compute_attachrank(graph, ranks)

    board = store.BoardStore(root, create=True)
    for page in pages:
        board.store_page(page)
    for attachment_id in table:
        anchor_text, attachment_class = anchors[attachment_id]
        entry = table[attachment_id]
        board.write_attachment_record(
            store.AttachmentRecord(
                attachment_id=attachment_id,
                attachment_class=attachment_class,
                ar=entry.ar,
                containing_pages=entry.containing_pages,
                anchor_text=anchor_text,
                fetched_at=WHEN,
                payload=b"payload of " + attachment_id.value.encode(),
            )
        )
    board.set_ranks(ranks, config)
    board.flush()
    return board


@pytest.fixture
def board(tmp_path) -> store.BoardStore:
    return build_board(str(tmp_path / "store"))


@pytest.fixture
def index(board) -> search.SearchIndex:
    return search.build_index(board)


def test_tokenize():
    assert search.tokenize("The Exam-Timetable, 2024_v2 a") == [
        "exam",
        "timetable",
        "2024",
        "v2",
    ]
    assert search.tokenize("Ünïcode CAFÉ") == ["ünïcode", "café"]
    assert search.tokenize("the of and") == []
    assert search.tokenize("exam rules", stopwords=frozenset(["rules"])) == ["exam"]


def test_index_statistics(index):
    assert index.doc_count == 3
    # anchor, title and body each mention it once
    assert index.tf("timetable", SPRING) == 3
    assert index.tf("timetable", AUTUMN) == 3
    assert index.df("timetable") == 2
    assert index.postings("timetable") == [(AUTUMN, 3), (SPRING, 3)]
    assert "for" not in index.terms()

    spring = index.documents[SPRING]
    assert spring.provenance == ("anchor", "http://a.edu/1.html")
    assert spring.containing_page == PageId("http://a.edu/1.html")
    assert spring.snippet == "exam timetable for spring"


def test_file_names_and_payloads_are_not_indexed(index):
    # "autumn" is only in a file name, "payload" only in payload bytes
    assert index.df("autumn") == 0
    assert index.df("payload") == 0
    assert search.query(index, "autumn", ar_weight=0.0).rows == []


def test_lexical_ties_fall_back_to_id_order(index):
    result = search.query(index, "spring timetable", ar_weight=0.0)
    assert result.ids() == [AUTUMN, SPRING]
    first, second = result.rows
    assert first.lexical_score == second.lexical_score
    assert first.final_score == first.lexical_score


def test_attachrank_breaks_lexical_ties(index):
    assert index.ar_values[SPRING] > index.ar_values[AUTUMN]
    result = search.query(index, "spring timetable", ar_weight=1.0)
    assert result.ids() == [SPRING, AUTUMN]

    top = result.rows[0]
    expected = top.lexical_score * (1 + index.ar_values[SPRING] / index.max_ar)
    assert top.final_score == pytest.approx(expected)


def test_k_limits_the_results(index):
    assert len(search.query(index, "timetable", k=1)) == 1
    with pytest.raises(search.SearchError):
        search.query(index, "timetable", k=0)


def test_class_filter(index):
    result = search.query(index, "rules", classes={AttachmentClass.TEXT})
    assert result.ids() == [RULES]
    assert result.rows[0].attachment_class == AttachmentClass.TEXT

    filtered = search.query(index, "timetable", classes={AttachmentClass.TEXT})
    assert len(filtered) == 0


def test_unknown_terms_match_nothing(index):
    assert len(search.query(index, "zebra")) == 0


def test_stopword_only_query_is_rejected(index):
    with pytest.raises(search.EmptyQueryError):
        search.query(index, "the of and")
    with pytest.raises(search.EmptyQueryError):
        search.query(index, "  ,; ")


def test_precision_at_k(index):
    result = search.query(index, "spring timetable", ar_weight=0.0)
    assert search.precision_at_k(result, {SPRING}, 1) == 0.0
    assert search.precision_at_k(result, {SPRING}, 2) == 0.5
    # missing results count as misses
    assert search.precision_at_k(result, {SPRING, AUTUMN}, 4) == 0.5
    with pytest.raises(search.SearchError):
        search.precision_at_k(result, {SPRING}, 0)


def test_saved_index_round_trips(board, index, tmp_path):
    path = str(tmp_path / "index.json")
    digest = board.manifest_digest()
    search.save_index(index, path, digest)

    loaded = search.load_index(path, digest)
    assert loaded is not None
    assert loaded.terms() == index.terms()
    assert dict(loaded.ar_values) == dict(index.ar_values)
    before = search.query(index, "spring timetable")
    after = search.query(loaded, "spring timetable")
    assert after.ids() == before.ids()
    assert [row.final_score for row in after] == [row.final_score for row in before]


def test_stale_or_broken_index_is_ignored(board, index, tmp_path):
    path = str(tmp_path / "index.json")
    assert search.load_index(path, board.manifest_digest()) is None

    search.save_index(index, path, "0" * 64)
    assert search.load_index(path, board.manifest_digest()) is None

    with open(path, "w", encoding="utf-8") as file:
        file.write("{not json")
    assert search.load_index(path, board.manifest_digest()) is None


def test_index_for_store_prefers_a_current_saved_index(board, index):
    path = board.path(store.INDEX_FILENAME)
    search.save_index(index, path, board.manifest_digest())
    modified = os.path.getmtime(path)

    found = search.index_for_store(board)
    assert found.terms() == index.terms()
    # never written to
    assert os.path.getmtime(path) == modified


def test_missing_record_fails_the_build(board):
    entry = board.manifest.attachments[RULES]
    os.remove(board.path(entry.path))
    with pytest.raises(search.IndexBuildError) as info:
        search.build_index(board)
    assert info.value.missing_paths == [entry.path]


def test_format_table(index):
    result = search.query(index, "spring timetable")
    text = search.format_table(result)
    lines = text.splitlines()
    assert lines[0].split() == ["#", "final", "lexical", "ar", "class", "attachment"]
    assert SPRING.value in lines[1]
    assert "on http://a.edu/1.html" in lines[2]
    assert search.format_table(search.query(index, "zebra")) == "no results\n"


def test_format_records(index):
    result = search.query(index, "spring timetable")
    records = [json.loads(line) for line in search.format_records(result).splitlines()]
    assert [record["id"] for record in records] == [SPRING.value, AUTUMN.value]
    assert records[0]["class"] == "document"
    assert records[0]["containing_page"] == "http://a.edu/1.html"
    assert set(records[0]) == {
        "id",
        "lexical_score",
        "final_score",
        "ar",
        "class",
        "containing_page",
        "snippet",
    }
