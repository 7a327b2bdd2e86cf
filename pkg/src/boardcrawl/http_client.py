# -*- coding: utf-8 -*-
"""
Purpose: Provides the HTTP client the crawler fetches pages and
attachments with.  It keeps one session for the whole crawl and is
polite to the board: requests to a single host can be spaced out by
a fixed delay, measured from the end of one request to the start of
the next.
"""

import asyncio
import collections
import datetime
import socket
import time
import typing
import urllib.parse
import urllib.robotparser

import aiohttp

from boardcrawl import fancy_logger

USER_AGENT = "boardcrawl/0.1"

HTML_CONTENT_TYPES = ("text/html", "application/xhtml+xml")


class FetchError(Exception):
    """
    Purpose: Base class for a failed retrieval.  These are recorded
    by the crawler and never stop a crawl, except for the seed.
    """

    def __init__(self, url: str, message: str):
        self.url = url
        super().__init__(f"{message}: [{url}]")


class FetchTimeoutError(FetchError):
    """
    The server didn't answer within the fetch timeout.
    """


class FetchConnectionError(FetchError):
    """
    The host couldn't be resolved or the connection failed.
    """


class HttpStatusError(FetchError):
    """
    The server answered with a non-2xx status.
    """

    def __init__(self, url: str, status: int):
        self.status = status
        super().__init__(url, f"HTTP status {status}")


class NonHtmlContentError(FetchError):
    """
    A page URL answered with something other than HTML.  Recorded as
    a fetch-skip.
    """

    def __init__(self, url: str, content_type: str):
        self.content_type = content_type
        super().__init__(url, f"not HTML ({content_type or 'no content type'})")


class RobotsDisallowedError(FetchError):
    """
    robots.txt forbids fetching this URL.
    """

    def __init__(self, url: str):
        super().__init__(url, "disallowed by robots.txt")


class RawDocument:
    """
    A successfully fetched resource.
    """

    def __init__(
        self,
        url: str,
        status: int,
        content_type: str,
        body: bytes,
        charset: typing.Optional[str] = None,
        fetched_at: typing.Optional[datetime.datetime] = None,
    ):
        self.url = url
        self.status = status
        self.content_type = content_type
        self.body = body
        self.charset = charset
        if fetched_at is None:
            fetched_at = datetime.datetime.now(datetime.timezone.utc)
        self.fetched_at = fetched_at

    def is_html(self) -> bool:
        return self.content_type.lower() in HTML_CONTENT_TYPES

    def __repr__(self) -> str:
        return (
            f"RawDocument({self.url!r}, {self.status}, {self.content_type!r}, "
            + f"{len(self.body)} bytes)"
        )


# the crawler only needs something it can await a document from
Fetcher = typing.Callable[[str], typing.Awaitable[RawDocument]]


class HostPoliteness:
    """
    Enforces a minimum gap between consecutive requests to one host.

    With a positive delay, requests to a host are serialized: the gate
    is held for the whole request, and the next holder waits until
    `delay` seconds after the previous request completed.
    """

    def __init__(self, delay_seconds: float):
        self.delay_seconds = delay_seconds
        self.last_completed: typing.Dict[str, float] = {}
        self.locks: typing.DefaultDict[str, asyncio.Lock] = collections.defaultdict(
            asyncio.Lock
        )

    async def _wait_turn(self, host: str) -> None:
        last = self.last_completed.get(host)
        if last is None:
            return
        wait_time = self.delay_seconds - (time.monotonic() - last)
        if wait_time > 0:
            fancy_logger.get().debug(
                "Politeness: waiting %.3fs for %s", wait_time, host
            )
            await asyncio.sleep(wait_time)

    async def run(
        self,
        host: str,
        fn_request: typing.Callable[[], typing.Awaitable[RawDocument]],
    ) -> RawDocument:
        if self.delay_seconds <= 0:
            return await fn_request()
        async with self.locks[host]:
            await self._wait_turn(host)
            try:
                return await fn_request()
            finally:
                self.last_completed[host] = time.monotonic()


class PoliteHttpClient:
    """
    Purpose: fetches pages and attachments for the crawler.

    Use as an async context manager; the session lives as long as
    the `async with` block.
    """

    def __init__(
        self,
        parallelism: int = 4,
        per_host_delay: float = 0.2,
        fetch_timeout: float = 10.0,
        respect_robots: bool = False,
    ):
        self.parallelism = parallelism
        self.fetch_timeout = fetch_timeout
        self.respect_robots = respect_robots
        self.politeness = HostPoliteness(per_host_delay)
        self.robots: typing.Dict[str, urllib.robotparser.RobotFileParser] = {}
        self._session: typing.Optional[aiohttp.ClientSession] = None

    def _get_session(self) -> aiohttp.ClientSession:
        """
        Returns: the session, if it exists
        Raises: RuntimeError if the session does not exist.
        """
        if not self._session:
            raise RuntimeError("Session not initialized, use 'async with'")
        return self._session

    async def __aenter__(self):
        connector = aiohttp.TCPConnector(limit_per_host=self.parallelism)
        self._session = aiohttp.ClientSession(
            connector=connector,
            timeout=aiohttp.ClientTimeout(total=self.fetch_timeout),
            headers={"User-Agent": USER_AGENT, "Accept-Encoding": "identity"},
            # payloads are stored byte for byte, as served
            auto_decompress=False,
        )
        return self

    async def __aexit__(self, *_err):
        if self._session:
            await self._session.close()
        self._session = None

    async def _get(self, url: str) -> RawDocument:
        try:
            async with self._get_session().get(url) as response:
                body = await response.read()
                if not 200 <= response.status < 300:
                    raise HttpStatusError(url, response.status)
                return RawDocument(
                    url=url,
                    status=response.status,
                    content_type=response.content_type or "",
                    body=body,
                    charset=response.charset,
                )
        except asyncio.TimeoutError as err:
            raise FetchTimeoutError(url, "timed out") from err
        except (
            aiohttp.ClientConnectionError,
            aiohttp.ClientError,
            ConnectionRefusedError,
            socket.gaierror,
        ) as err:
            raise FetchConnectionError(url, f"could not connect ({err})") from err
        except ValueError as err:
            # hosts aiohttp can't encode, e.g. an empty IDNA label
            raise FetchConnectionError(url, f"bad address ({err})") from err

    async def _robots_for(self, url: str) -> urllib.robotparser.RobotFileParser:
        parts = urllib.parse.urlsplit(url)
        origin = f"{parts.scheme}://{parts.netloc}"
        parser = self.robots.get(origin)
        if parser is not None:
            return parser

        parser = urllib.robotparser.RobotFileParser(origin + "/robots.txt")
        try:
            document = await self.politeness.run(
                parts.netloc, lambda: self._get(origin + "/robots.txt")
            )
            parser.parse(document.body.decode("utf-8", errors="replace").splitlines())
        except FetchError as err:
            # no readable robots.txt means everything is allowed
            fancy_logger.get().debug("No robots.txt for %s: %s", origin, err)
            parser.parse([])
        self.robots[origin] = parser
        return parser

    async def fetch_page(self, url: str) -> RawDocument:
        """
        Fetches one URL, a page or an attachment.  Deciding whether a
        page is HTML is left to the caller.

        Returns:
            the body, content type and status, if the server answered 2xx

        Raises:
            FetchError (one of its subclasses) for timeouts, connection
            failures, non-2xx statuses and robots.txt refusals
        """
        if self.respect_robots:
            robots = await self._robots_for(url)
            if not robots.can_fetch(USER_AGENT, url):
                raise RobotsDisallowedError(url)

        host = urllib.parse.urlsplit(url).netloc
        document = await self.politeness.run(host, lambda: self._get(url))
        fancy_logger.get().debug(
            "Fetched %s (%d, %s, %d bytes)",
            url,
            document.status,
            document.content_type,
            len(document.body),
        )
        return document

