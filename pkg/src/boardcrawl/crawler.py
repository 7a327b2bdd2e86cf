# -*- coding: utf-8 -*-
"""
The crawl loop.  Starting from a seed page, repeatedly:

  - take the next stored page URL off the frontier and retrieve it
  - scan every hyperlink on it and classify each one
  - attachments are fetched once each and kept for the store;
    pages are stored on the frontier; everything else is discarded

until the frontier runs out (or the page cap is hit).

Up to `parallelism` fetches run at once, but every frontier mutation
happens in the single coordinator loop, so no URL is ever handed to
two workers.
"""

import asyncio
import collections
import typing

from boardcrawl import classifier
from boardcrawl import crawl_stats
from boardcrawl import fancy_logger
from boardcrawl import graph_model
from boardcrawl import http_client
from boardcrawl import scanner


class CrawlError(Exception):
    """
    Raised when a crawl can't proceed at all, e.g. the seed page
    can't be fetched.
    """


class CrawlConfig:
    """
    Parameters for one crawl.
    """

    def __init__(
        self,
        seed: graph_model.PageId,
        scope_to_host: bool = True,
        max_pages: int = 10000,
        parallelism: int = 4,
        per_host_delay: float = 0.2,
        fetch_timeout: float = 10.0,
        respect_robots: bool = False,
    ):
        if parallelism < 1:
            raise CrawlError(f"parallelism must be at least 1, got {parallelism}")
        if max_pages < 1:
            raise CrawlError(f"max_pages must be at least 1, got {max_pages}")
        self.seed = seed
        self.scope_to_host = scope_to_host
        self.max_pages = max_pages
        self.parallelism = parallelism
        self.per_host_delay = per_host_delay
        self.fetch_timeout = fetch_timeout
        self.respect_robots = respect_robots

    @property
    def scope(self) -> graph_model.HostScope:
        if self.scope_to_host:
            return graph_model.HostScope.for_seed(self.seed)
        return graph_model.HostScope.any_host()


class Frontier:
    """
    FIFO queue of page URLs still to fetch.

    `seen` holds every URL ever offered, so nothing is queued twice;
    `fetched` holds every URL handed out by next_url().
    """

    def __init__(self, max_pages: typing.Optional[int] = None):
        self.max_pages = max_pages
        self.queue: typing.Deque[graph_model.PageId] = collections.deque()
        self.seen: typing.Set[graph_model.PageId] = set()
        self.fetched: typing.Set[graph_model.PageId] = set()

    def enqueue(
        self,
        url: graph_model.PageId,
        scope: graph_model.HostScope,
    ) -> bool:
        """
        Appends url if it was never seen and is within scope.  Marks
        it seen either way.  Returns whether it was appended.
        """
        first_sighting = url not in self.seen
        self.seen.add(url)
        if not first_sighting or not scope.allows(url):
            return False
        self.queue.append(url)
        return True

    def next_url(self) -> typing.Optional[graph_model.PageId]:
        """
        Returns the oldest queued URL and marks it fetched, or None
        when the queue is empty or the page cap has been reached.
        """
        if not self.queue:
            return None
        if self.max_pages is not None and len(self.fetched) >= self.max_pages:
            return None
        url = self.queue.popleft()
        self.fetched.add(url)
        return url

    def __len__(self) -> int:
        return len(self.queue)


class AttachmentRef:
    """
    One (attachment, containing page) pair found during the crawl.
    """

    __slots__ = ("attachment_id", "page_id", "attachment_class", "anchor_text")

    def __init__(
        self,
        attachment_id: graph_model.AttachmentId,
        page_id: graph_model.PageId,
        attachment_class: graph_model.AttachmentClass,
        anchor_text: str,
    ):
        self.attachment_id = attachment_id
        self.page_id = page_id
        self.attachment_class = attachment_class
        self.anchor_text = anchor_text

    def __repr__(self) -> str:
        return (
            f"AttachmentRef({self.attachment_id}, in={self.page_id}, "
            + f"{self.attachment_class})"
        )


class FoundAttachment:
    """
    A distinct attachment: its class, the anchor text it was first
    linked with, and its payload once fetched.
    """

    def __init__(
        self,
        attachment_id: graph_model.AttachmentId,
        attachment_class: graph_model.AttachmentClass,
        anchor_text: str,
    ):
        self.attachment_id = attachment_id
        self.attachment_class = attachment_class
        self.anchor_text = anchor_text
        self.payload: typing.Optional[http_client.RawDocument] = None


class CrawlResult:
    """
    Everything a crawl produced.  Every attachment ref's containing
    page is one of `pages`.
    """

    def __init__(
        self,
        pages: typing.List[graph_model.PageRecord],
        attachment_refs: typing.List[AttachmentRef],
        attachments: typing.Dict[graph_model.AttachmentId, FoundAttachment],
        stats: crawl_stats.CrawlStats,
    ):
        self.pages = pages
        self.attachment_refs = attachment_refs
        self.attachments = attachments
        self.stats = stats


class _Job:
    __slots__ = ("order", "page_id", "attachment_id")

    def __init__(
        self,
        order: int,
        page_id: typing.Optional[graph_model.PageId] = None,
        attachment_id: typing.Optional[graph_model.AttachmentId] = None,
    ):
        self.order = order
        self.page_id = page_id
        self.attachment_id = attachment_id


class Crawler:
    """
    Runs one crawl.  Create a new one per crawl.
    """

    def __init__(
        self,
        config: CrawlConfig,
        fetch: http_client.Fetcher,
        suffix_table: typing.Optional[classifier.SuffixTable] = None,
    ):
        self.config = config
        self.fetch = fetch
        self.suffix_table = suffix_table or classifier.SuffixTable.default()
        self.scope = config.scope
        self.frontier = Frontier(max_pages=config.max_pages)
        self.stats = crawl_stats.CrawlStats()

        self.pages: typing.List[graph_model.PageRecord] = []
        self.attachment_refs: typing.List[AttachmentRef] = []
        self.attachments: typing.Dict[graph_model.AttachmentId, FoundAttachment] = {}
        self.ref_keys: typing.Set[
            typing.Tuple[graph_model.AttachmentId, graph_model.PageId]
        ] = set()
        self.payload_queue: typing.Deque[graph_model.AttachmentId] = (
            collections.deque()
        )
        self.job_counter = 0

    def _new_job(self, **kwargs) -> _Job:
        self.job_counter += 1
        return _Job(self.job_counter, **kwargs)

    def _start_jobs(self, pending: typing.Dict["asyncio.Future", _Job]) -> None:
        while len(pending) < self.config.parallelism:
            if self.payload_queue:
                attachment_id = self.payload_queue.popleft()
                job = self._new_job(attachment_id=attachment_id)
                pending[asyncio.ensure_future(self.fetch(attachment_id.value))] = job
                continue
            page_id = self.frontier.next_url()
            if page_id is None:
                return
            job = self._new_job(page_id=page_id)
            pending[asyncio.ensure_future(self.fetch(page_id.value))] = job

    def _note_attachment(
        self,
        decision: classifier.Attachment,
        page_id: graph_model.PageId,
        anchor_text: str,
    ) -> None:
        attachment_id = decision.attachment_id
        key = (attachment_id, page_id)
        if key not in self.ref_keys:
            self.ref_keys.add(key)
            self.attachment_refs.append(
                AttachmentRef(
                    attachment_id, page_id, decision.attachment_class, anchor_text
                )
            )
        if attachment_id in self.attachments:
            return
        self.attachments[attachment_id] = FoundAttachment(
            attachment_id, decision.attachment_class, anchor_text
        )
        self.stats.log_attachment_found()
        self.payload_queue.append(attachment_id)

    def _process_page(
        self,
        page_id: graph_model.PageId,
        document: http_client.RawDocument,
    ) -> None:
        links = scanner.extract_links(document.body, page_id, document.charset)
        title, body_text = scanner.extract_page_text(document.body, document.charset)

        outlinks: typing.List[graph_model.PageId] = []
        attachment_ids: typing.List[graph_model.AttachmentId] = []
        for link in links:
            normalized = scanner.normalize_url(page_id, link.href)
            decision = classifier.classify_link(normalized, self.suffix_table)

            if isinstance(decision, classifier.Page):
                outlinks.append(decision.page_id)
                if not self.scope.allows(decision.page_id):
                    self.stats.log_link_discarded()
                    continue
                self.frontier.enqueue(decision.page_id, self.scope)

            elif isinstance(decision, classifier.Attachment):
                if not self.scope.allows(decision.attachment_id):
                    self.stats.log_link_discarded()
                    continue
                attachment_ids.append(decision.attachment_id)
                self._note_attachment(decision, page_id, link.anchor_text)

            else:
                self.stats.log_link_discarded()

        self.pages.append(
            graph_model.PageRecord(
                page_id=page_id,
                title=title,
                body_text=body_text,
                fetched_at=document.fetched_at,
                http_status=document.status,
                outlinks=outlinks,
                attachments=attachment_ids,
            )
        )
        self.stats.log_page_fetched()
        fancy_logger.get().debug(
            "Scanned %s: %d links, %d queued",
            page_id,
            len(links),
            len(self.frontier),
        )

    def _complete_page(self, job: _Job, future: "asyncio.Future") -> None:
        page_id = job.page_id
        assert page_id is not None
        try:
            document: http_client.RawDocument = future.result()
            if not document.is_html():
                raise http_client.NonHtmlContentError(
                    page_id.value, document.content_type
                )
        except http_client.FetchError as err:
            self.stats.log_page_failure(
                non_html=isinstance(err, http_client.NonHtmlContentError),
                robots=isinstance(err, http_client.RobotsDisallowedError),
            )
            if page_id == self.config.seed:
                raise CrawlError(f"Could not fetch seed page {page_id}: {err}") from err
            fancy_logger.get().warning("Skipping page: %s", err)
            return
        self._process_page(page_id, document)

    def _complete_attachment(self, job: _Job, future: "asyncio.Future") -> None:
        attachment_id = job.attachment_id
        assert attachment_id is not None
        try:
            document: http_client.RawDocument = future.result()
        except http_client.FetchError as err:
            self.stats.log_attachment_payload(success=False)
            fancy_logger.get().warning("Could not fetch attachment: %s", err)
            return
        self.attachments[attachment_id].payload = document
        self.stats.log_attachment_payload(success=True)

    async def run(self) -> CrawlResult:
        seed = self.config.seed
        if not self.frontier.enqueue(seed, self.scope):
            raise CrawlError(f"Seed {seed} is outside the crawl scope {self.scope}")

        fancy_logger.get().info(
            "Crawling from %s (scope: %s, parallelism: %d, max pages: %d)",
            seed,
            self.scope,
            self.config.parallelism,
            self.config.max_pages,
        )

        pending: typing.Dict["asyncio.Future", _Job] = {}
        try:
            while True:
                self._start_jobs(pending)
                if not pending:
                    break
                done, _ = await asyncio.wait(
                    list(pending.keys()), return_when=asyncio.FIRST_COMPLETED
                )
                # handle simultaneous completions in dispatch order
                for future in sorted(done, key=lambda f: pending[f].order):
                    job = pending.pop(future)
                    if job.page_id is not None:
                        self._complete_page(job, future)
                    else:
                        self._complete_attachment(job, future)
        finally:
            for future in pending:
                future.cancel()
            if pending:
                await asyncio.gather(*pending.keys(), return_exceptions=True)

        self.stats.finish()
        self.stats.write_stat_summary_to_log()
        return CrawlResult(
            pages=self.pages,
            attachment_refs=self.attachment_refs,
            attachments=self.attachments,
            stats=self.stats,
        )


async def crawl(
    config: CrawlConfig,
    fetch: http_client.Fetcher,
    suffix_table: typing.Optional[classifier.SuffixTable] = None,
) -> CrawlResult:
    """
    Crawls from config.seed with the given fetch capability.

    With parallelism 1 and a deterministic fetcher, pages are fetched
    in breadth-first order of their links.

    Raises CrawlError if the seed can't be fetched; any other page
    failure is counted in the stats and the crawl goes on.
    """
    return await Crawler(config, fetch, suffix_table).run()
