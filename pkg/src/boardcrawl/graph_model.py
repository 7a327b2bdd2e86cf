# -*- coding: utf-8 -*-
"""
Domain types shared by every stage of the crawler: page and attachment
identifiers, fetched page records, attachment classes, and the sealed
link graph that ranking runs over.

All of these are immutable once built, so they can be shared freely
between the crawl workers, the ranker and the store.
"""

import datetime
import enum
import functools
import typing
import urllib.parse

from boardcrawl import fancy_logger


class GraphStructureError(Exception):
    """
    Raised when crawl output can't be turned into a consistent graph,
    e.g. two records share one PageId.
    """


def url_suffix(url: str) -> str:
    """
    Returns the lowercase extension of the final path segment of
    the given URL, without the leading dot.  Query and fragment are
    ignored.  A segment without a dot (or a trailing slash) has the
    empty suffix.
    """
    path = urllib.parse.urlsplit(url).path
    last_segment = path.rsplit("/", 1)[-1]
    if "." not in last_segment:
        return ""
    return last_segment.rsplit(".", 1)[-1].lower()


@functools.total_ordering
class PageId:
    """
    A normalized absolute URL naming one bulletin-board page.

    Use scanner.normalize_url() to build these from raw hrefs; the
    constructor trusts that its input is already normalized.
    """

    __slots__ = ("_value",)

    def __init__(self, value: str):
        self._value = value

    @property
    def value(self) -> str:
        return self._value

    @property
    def host(self) -> str:
        return urllib.parse.urlsplit(self._value).netloc

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PageId):
            return NotImplemented
        return self._value == other._value

    def __lt__(self, other: "PageId") -> bool:
        return self._value < other._value

    def __hash__(self) -> int:
        return hash(self._value)

    def __str__(self) -> str:
        return self._value

    def __repr__(self) -> str:
        return f"PageId({self._value!r})"


@functools.total_ordering
class AttachmentId:
    """
    A normalized absolute URL naming one attachment file, together
    with its lowercase suffix.
    """

    __slots__ = ("_value", "_suffix")

    def __init__(self, value: str):
        self._value = value
        self._suffix = url_suffix(value)

    @property
    def value(self) -> str:
        return self._value

    @property
    def suffix(self) -> str:
        return self._suffix

    @property
    def host(self) -> str:
        return urllib.parse.urlsplit(self._value).netloc

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttachmentId):
            return NotImplemented
        return self._value == other._value

    def __lt__(self, other: "AttachmentId") -> bool:
        return self._value < other._value

    def __hash__(self) -> int:
        return hash(self._value)

    def __str__(self) -> str:
        return self._value

    def __repr__(self) -> str:
        return f"AttachmentId({self._value!r})"


class AttachmentClass(str, enum.Enum):
    """
    The kinds of attachment the store sorts files into.
    """

    DOCUMENT = "document"
    SPREADSHEET = "spreadsheet"
    PRESENTATION = "presentation"
    TEXT = "text"
    ARCHIVE = "archive"
    IMAGE = "image"
    OTHER = "other"

    def __str__(self) -> str:
        return self.value


def _dedupe_keep_order(items: typing.Iterable[typing.Any]) -> typing.Tuple:
    seen = set()
    out = []
    for item in items:
        if item in seen:
            continue
        seen.add(item)
        out.append(item)
    return tuple(out)


class PageRecord:
    """
    One fetched bulletin-board page.

    Outlinks and attachments keep document order with duplicates
    collapsed onto their first occurrence; a link from the page to
    itself is dropped.
    """

    def __init__(
        self,
        page_id: PageId,
        title: str,
        body_text: str,
        fetched_at: datetime.datetime,
        http_status: int,
        outlinks: typing.Iterable[PageId] = (),
        attachments: typing.Iterable[AttachmentId] = (),
    ):
        self._id = page_id
        self._title = title
        self._body_text = body_text
        self._fetched_at = fetched_at
        self._http_status = http_status
        self._outlinks: typing.Tuple[PageId, ...] = _dedupe_keep_order(
            link for link in outlinks if link != page_id
        )
        self._attachments: typing.Tuple[AttachmentId, ...] = _dedupe_keep_order(
            attachments
        )

    @property
    def id(self) -> PageId:
        return self._id

    @property
    def title(self) -> str:
        return self._title

    @property
    def body_text(self) -> str:
        return self._body_text

    @property
    def fetched_at(self) -> datetime.datetime:
        return self._fetched_at

    @property
    def http_status(self) -> int:
        return self._http_status

    @property
    def outlinks(self) -> typing.Tuple[PageId, ...]:
        return self._outlinks

    @property
    def attachments(self) -> typing.Tuple[AttachmentId, ...]:
        return self._attachments

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PageRecord):
            return NotImplemented
        return (
            self._id == other._id
            and self._title == other._title
            and self._body_text == other._body_text
            and self._fetched_at == other._fetched_at
            and self._http_status == other._http_status
            and self._outlinks == other._outlinks
            and self._attachments == other._attachments
        )

    def __repr__(self) -> str:
        return (
            f"PageRecord({self._id.value!r}, outlinks={len(self._outlinks)}, "
            + f"attachments={len(self._attachments)})"
        )


class HostScope:
    """
    Decides which URLs a crawl may follow.  Either restricted to one
    host (the seed's), or open to any host.
    """

    def __init__(self, host: typing.Optional[str]):
        self._host = host

    @classmethod
    def any_host(cls) -> "HostScope":
        return cls(None)

    @classmethod
    def for_seed(cls, seed: PageId) -> "HostScope":
        return cls(seed.host)

    @property
    def host(self) -> typing.Optional[str]:
        return self._host

    def allows(self, url: typing.Union[PageId, AttachmentId]) -> bool:
        if self._host is None:
            return True
        return url.host == self._host

    def __repr__(self) -> str:
        return f"HostScope({self._host or '*'})"


class LinkGraph:
    """
    The sealed page graph: nodes, page -> page edges, and
    page -> attachment containment.  Every edge endpoint and every
    containment key is a node.
    """

    def __init__(
        self,
        nodes: typing.FrozenSet[PageId],
        edges: typing.Dict[PageId, typing.Tuple[PageId, ...]],
        containment: typing.Dict[PageId, typing.Tuple[AttachmentId, ...]],
    ):
        self._nodes = nodes
        self._edges = edges
        self._containment = containment

    @property
    def nodes(self) -> typing.FrozenSet[PageId]:
        return self._nodes

    @property
    def edges(self) -> typing.Mapping[PageId, typing.Tuple[PageId, ...]]:
        return self._edges

    @property
    def containment(self) -> typing.Mapping[PageId, typing.Tuple[AttachmentId, ...]]:
        return self._containment

    def out_degree(self, page_id: PageId) -> int:
        """
        C(A): the number of in-graph pages that page A links to.
        """
        return len(self._edges.get(page_id, ()))

    def edge_count(self) -> int:
        return sum(len(targets) for targets in self._edges.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinkGraph):
            return NotImplemented
        return (
            self._nodes == other._nodes
            and self._edges == other._edges
            and self._containment == other._containment
        )

    def __repr__(self) -> str:
        return f"LinkGraph(nodes={len(self._nodes)}, edges={self.edge_count()})"


def seal_graph(
    pages: typing.Iterable[PageRecord],
    scope: typing.Optional[HostScope] = None,
) -> LinkGraph:
    """
    Builds the link graph from crawl output.

    Pages outside the scope are left out, then every outlink whose
    target isn't one of the remaining pages is dropped.  Containment
    is copied verbatim.

    Raises GraphStructureError if two records share a PageId.
    """
    if scope is None:
        scope = HostScope.any_host()

    by_id: typing.Dict[PageId, PageRecord] = {}
    for page in pages:
        if page.id in by_id:
            raise GraphStructureError(f"Duplicate page id in crawl output: {page.id}")
        by_id[page.id] = page

    nodes = frozenset(page_id for page_id in by_id if scope.allows(page_id))

    edges: typing.Dict[PageId, typing.Tuple[PageId, ...]] = {}
    containment: typing.Dict[PageId, typing.Tuple[AttachmentId, ...]] = {}
    pruned = 0
    for page_id in sorted(nodes):
        page = by_id[page_id]
        targets = tuple(link for link in page.outlinks if link in nodes)
        pruned += len(page.outlinks) - len(targets)
        edges[page_id] = targets
        containment[page_id] = page.attachments

    graph = LinkGraph(nodes=nodes, edges=edges, containment=containment)
    fancy_logger.get().debug(
        "Sealed graph: %d nodes, %d edges, %d dangling references pruned",
        len(nodes),
        graph.edge_count(),
        pruned,
    )
    return graph
