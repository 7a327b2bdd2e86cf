# -*- coding: utf-8 -*-
"""
tests for the crawl loop, run against an in-memory site
"""
import asyncio

from conftest import FakeSite
from conftest import html_page
import pytest

from boardcrawl import crawler
from boardcrawl import graph_model

PageId = graph_model.PageId
AttachmentId = graph_model.AttachmentId

ROOT = "http://board.a.edu/"
SEED = PageId(ROOT + "index.html")


def build_site(site: FakeSite) -> FakeSite:
    """
    index -> a, b; a -> c, index; b -> c, d, notes; d -> missing.
    notes.html answers with a non-HTML content type.
    """
    site.add_page(
        ROOT + "index.html",
        html_page(
            "Notice board",
            ("a.html", "Notice A"),
            ("b.html", "Notice B"),
            ("files/x.doc", "Exam timetable"),
            ("mailto:office@board.a.edu", "Write to us"),
            ("http://other.org/p.html", "Elsewhere"),
            body="Welcome to the board",
        ),
    )
    site.add_page(
        ROOT + "a.html",
        html_page(
            "Notice A",
            ("c.html", "Notice C"),
            ("index.html", "Home"),
            ("files/x.doc", "The same timetable"),
            ("files/y.TXT", "Plain notes"),
        ),
    )
    site.add_page(
        ROOT + "b.html",
        html_page(
            "Notice B",
            ("c.html", "Notice C"),
            ("d.html", "Notice D"),
            ("notes.html", "Notes"),
        ),
    )
    site.add_page(ROOT + "c.html", html_page("Notice C", body="nothing linked"))
    site.add_page(
        ROOT + "d.html",
        html_page("Notice D", ("missing.html", "Gone"), ("logo.png", "Logo")),
    )
    site.add_file(ROOT + "notes.html", b"just text", "text/plain")
    site.add_file(ROOT + "files/x.doc", b"\xd0\xcf\x11\xe0doc", "application/msword")
    site.add_file(ROOT + "files/y.TXT", b"plain notes\n", "text/plain")
    return site


def run_crawl(site: FakeSite, **kwargs) -> crawler.CrawlResult:
    kwargs.setdefault("parallelism", 1)
    config = crawler.CrawlConfig(seed=SEED, per_host_delay=0.0, **kwargs)
    return asyncio.run(crawler.crawl(config, site.fetch))


def requested_pages(site: FakeSite):
    return [url for url in site.requested if url.endswith(".html")]


def test_pages_are_fetched_breadth_first(fake_site):
    build_site(fake_site)
    result = run_crawl(fake_site)
    assert requested_pages(fake_site) == [
        ROOT + "index.html",
        ROOT + "a.html",
        ROOT + "b.html",
        ROOT + "c.html",
        ROOT + "d.html",
        ROOT + "notes.html",
        ROOT + "missing.html",
    ]
    assert [page.id.value for page in result.pages] == [
        ROOT + "index.html",
        ROOT + "a.html",
        ROOT + "b.html",
        ROOT + "c.html",
        ROOT + "d.html",
    ]


def test_page_records(fake_site):
    build_site(fake_site)
    result = run_crawl(fake_site)
    index = result.pages[0]
    assert index.title == "Notice board"
    assert index.http_status == 200
    # out-of-scope pages stay as graph edges, they just aren't fetched
    assert index.outlinks == (
        PageId(ROOT + "a.html"),
        PageId(ROOT + "b.html"),
        PageId("http://other.org/p.html"),
    )
    assert index.attachments == (AttachmentId(ROOT + "files/x.doc"),)
    assert result.pages[3].outlinks == ()


def test_crawl_stats(fake_site):
    build_site(fake_site)
    stats = run_crawl(fake_site).stats
    assert stats.as_dict() == {
        "pages_fetched": 5,
        "fetch_errors": 2,
        "non_html_skips": 1,
        "robots_refusals": 0,
        "attachments_found": 3,
        "attachment_payloads_fetched": 2,
        "attachment_fetch_errors": 1,
        "links_discarded": 2,
    }


def test_attachments_are_fetched_once(fake_site):
    build_site(fake_site)
    result = run_crawl(fake_site)
    x_doc = AttachmentId(ROOT + "files/x.doc")
    assert fake_site.requested.count(x_doc.value) == 1

    refs = [
        (ref.attachment_id.value, ref.page_id.value) for ref in result.attachment_refs
    ]
    assert refs == [
        (ROOT + "files/x.doc", ROOT + "index.html"),
        (ROOT + "files/x.doc", ROOT + "a.html"),
        (ROOT + "files/y.TXT", ROOT + "a.html"),
        (ROOT + "logo.png", ROOT + "d.html"),
    ]

    found = result.attachments[x_doc]
    assert found.attachment_class == graph_model.AttachmentClass.DOCUMENT
    # the first link seen names it
    assert found.anchor_text == "Exam timetable"
    assert found.payload is not None
    assert found.payload.body == b"\xd0\xcf\x11\xe0doc"

    text = result.attachments[AttachmentId(ROOT + "files/y.TXT")]
    assert text.attachment_class == graph_model.AttachmentClass.TEXT

    logo = result.attachments[AttachmentId(ROOT + "logo.png")]
    assert logo.attachment_class == graph_model.AttachmentClass.IMAGE
    assert logo.payload is None


def test_every_ref_points_at_a_crawled_page(fake_site):
    build_site(fake_site)
    result = run_crawl(fake_site, parallelism=4)
    crawled = {page.id for page in result.pages}
    assert all(ref.page_id in crawled for ref in result.attachment_refs)


def test_parallel_crawl_finds_the_same_site(fake_site):
    build_site(fake_site)
    serial = run_crawl(fake_site)
    parallel = run_crawl(build_site(FakeSite()), parallelism=4)
    assert sorted(page.id for page in parallel.pages) == sorted(
        page.id for page in serial.pages
    )
    assert sorted(parallel.attachments) == sorted(serial.attachments)
    assert parallel.stats.as_dict() == serial.stats.as_dict()


def test_max_pages_caps_the_crawl(fake_site):
    build_site(fake_site)
    result = run_crawl(fake_site, max_pages=2)
    assert [page.id.value for page in result.pages] == [
        ROOT + "index.html",
        ROOT + "a.html",
    ]
    assert ROOT + "b.html" not in fake_site.requested


def test_any_host_scope_follows_other_hosts(fake_site):
    build_site(fake_site)
    result = run_crawl(fake_site, scope_to_host=False)
    assert "http://other.org/p.html" in fake_site.requested
    # fake site doesn't serve it: one more fetch error, one fewer discard
    assert result.stats.fetch_errors == 3
    assert result.stats.links_discarded == 1


def test_links_to_unencodable_hosts_are_discarded(fake_site):
    fake_site.add_page(
        SEED.value,
        html_page(
            "Notice board",
            ("http://a..b/notice.html", "Broken host"),
            ("http://a..b/files/x.doc", "Broken file"),
        ),
    )
    result = run_crawl(fake_site, scope_to_host=False)
    assert fake_site.requested == [SEED.value]
    assert result.stats.links_discarded == 2
    assert result.pages[0].outlinks == ()


def test_unfetchable_seed_fails_the_crawl(fake_site):
    with pytest.raises(crawler.CrawlError):
        run_crawl(fake_site)

    fake_site.add_file(SEED.value, b"%PDF", "application/pdf")
    with pytest.raises(crawler.CrawlError):
        run_crawl(fake_site)


def test_seed_with_no_links(fake_site):
    fake_site.add_page(SEED.value, html_page("Empty board"))
    result = run_crawl(fake_site)
    assert len(result.pages) == 1
    assert result.pages[0].outlinks == ()
    assert not result.attachments


def test_crawl_config_validation():
    with pytest.raises(crawler.CrawlError):
        crawler.CrawlConfig(seed=SEED, parallelism=0)
    with pytest.raises(crawler.CrawlError):
        crawler.CrawlConfig(seed=SEED, max_pages=0)
    assert crawler.CrawlConfig(seed=SEED).scope.allows(PageId(ROOT + "x.html"))
    assert not crawler.CrawlConfig(seed=SEED).scope.allows(
        PageId("http://other.org/")
    )


def test_frontier_queues_each_url_once():
    scope = graph_model.HostScope.for_seed(SEED)
    frontier = crawler.Frontier(max_pages=2)
    assert frontier.enqueue(SEED, scope)
    assert not frontier.enqueue(SEED, scope)
    assert not frontier.enqueue(PageId("http://other.org/"), scope)
    assert PageId("http://other.org/") in frontier.seen
    assert frontier.enqueue(PageId(ROOT + "a.html"), scope)
    assert frontier.enqueue(PageId(ROOT + "b.html"), scope)

    assert frontier.next_url() == SEED
    assert frontier.next_url() == PageId(ROOT + "a.html")
    # the cap is reached with one URL still queued
    assert len(frontier) == 1
    assert frontier.next_url() is None
