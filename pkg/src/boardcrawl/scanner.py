# -*- coding: utf-8 -*-
"""
Finds the hyperlinks and the readable text in a fetched page, and
turns raw hrefs into normalized absolute URLs.

Bulletin-board HTML is frequently invalid, so nothing in here ever
fails a page: broken markup yields fewer links, never an exception.
"""

import re
import typing
import urllib.parse

import bs4

from boardcrawl import fancy_logger
from boardcrawl import graph_model

FETCHABLE_SCHEMES = ("http", "https")
DEFAULT_PORTS = {"http": 80, "https": 443}

# characters left alone when re-quoting a path or query, so that
# re-normalizing an already-normalized URL changes nothing
PATH_SAFE_CHARS = "/%:@!$&'()*+,;=-._~"
QUERY_SAFE_CHARS = PATH_SAFE_CHARS + "?"

# elements whose text is never shown to a reader
INVISIBLE_ELEMENTS = ["script", "style", "noscript", "template", "title", "head"]

# last-ditch link scan for documents the parser can't cope with
HREF_PATTERN = re.compile(
    r"""<a\b[^>]*?\bhref\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>]+))""",
    re.IGNORECASE,
)


class NotFetchableUrl:
    """
    Result of normalize_url() for hrefs that can't be crawled: other
    schemes (mailto:, javascript:, ...) or unparseable text.
    """

    __slots__ = ("_href", "_reason")

    def __init__(self, href: str, reason: str):
        self._href = href
        self._reason = reason

    @property
    def href(self) -> str:
        return self._href

    @property
    def reason(self) -> str:
        return self._reason

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NotFetchableUrl):
            return NotImplemented
        return self._href == other._href and self._reason == other._reason

    def __repr__(self) -> str:
        return f"NotFetchableUrl({self._href!r}, {self._reason!r})"


class RawLink:
    """
    One `a href` found in a page, exactly as written.
    """

    __slots__ = ("href", "anchor_text", "base", "position")

    def __init__(
        self,
        href: str,
        anchor_text: str,
        base: graph_model.PageId,
        position: int,
    ):
        self.href = href
        self.anchor_text = anchor_text
        self.base = base
        self.position = position

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RawLink):
            return NotImplemented
        return (
            self.href == other.href
            and self.anchor_text == other.anchor_text
            and self.base == other.base
            and self.position == other.position
        )

    def __repr__(self) -> str:
        return f"RawLink({self.href!r}, {self.anchor_text!r}, #{self.position})"


def collapse_whitespace(text: str) -> str:
    return " ".join(text.split())


def _remove_dot_segments(path: str) -> str:
    # RFC 3986 section 5.2.4
    output: typing.List[str] = []
    segments = path.split("/")
    for i, segment in enumerate(segments):
        is_last = i == len(segments) - 1
        if segment == ".":
            if is_last:
                output.append("")
            continue
        if segment == "..":
            if len(output) > 1:
                output.pop()
            if is_last:
                output.append("")
            continue
        output.append(segment)
    result = "/".join(output)
    if path.startswith("/") and not result.startswith("/"):
        result = "/" + result
    return result


def normalize_url(
    base: typing.Union[graph_model.PageId, str],
    href: str,
) -> typing.Union[graph_model.PageId, NotFetchableUrl]:
    """
    Resolves href against base and returns the canonical absolute URL.

    Scheme and host are lowercased, default ports and fragments are
    removed, and dot segments are resolved.  Path case and the query
    string are kept.  Anything that isn't http(s) comes back as
    NotFetchableUrl.
    """
    base_text = str(base)
    href = href.strip()
    try:
        absolute = urllib.parse.urljoin(base_text, href)
        parts = urllib.parse.urlsplit(absolute)
        scheme = parts.scheme.lower()
        if scheme not in FETCHABLE_SCHEMES:
            return NotFetchableUrl(href, f"scheme '{scheme}' is not crawlable")

        hostname = parts.hostname
        if not hostname:
            return NotFetchableUrl(href, "no host")
        port = parts.port
    except ValueError as err:
        return NotFetchableUrl(href, f"unparseable: {err}")

    host = hostname.lower()
    try:
        host.encode("idna")
    except UnicodeError as err:
        return NotFetchableUrl(href, f"bad host name: {err}")
    if ":" in host:
        host = f"[{host}]"
    if port is not None and port != DEFAULT_PORTS[scheme]:
        host = f"{host}:{port}"

    netloc = host
    if parts.username is not None:
        userinfo = parts.username
        if parts.password is not None:
            userinfo += ":" + parts.password
        netloc = f"{userinfo}@{host}"

    path = _remove_dot_segments(parts.path) or "/"
    path = urllib.parse.quote(path, safe=PATH_SAFE_CHARS)
    query = urllib.parse.quote(parts.query, safe=QUERY_SAFE_CHARS)

    return graph_model.PageId(
        urllib.parse.urlunsplit((scheme, netloc, path, query, ""))
    )


def _make_soup(html: bytes, encoding: typing.Optional[str]) -> bs4.BeautifulSoup:
    return bs4.BeautifulSoup(html, "html.parser", from_encoding=encoding)


def _permissive_scan(
    html: bytes, base: graph_model.PageId
) -> typing.List[RawLink]:
    text = html.decode("utf-8", errors="replace")
    links = []
    for match in HREF_PATTERN.finditer(text):
        href = next(group for group in match.groups() if group is not None)
        links.append(RawLink(href, "", base, len(links)))
    return links


def extract_links(
    html: bytes,
    base: graph_model.PageId,
    encoding: typing.Optional[str] = None,
) -> typing.List[RawLink]:
    """
    Returns every `a href` in the document, in document order, with
    its anchor text.  Other elements that reference URLs (img, script,
    frames) are not hyperlinks and are ignored.

    encoding is the charset declared by the server, if any.
    """
    try:
        soup = _make_soup(html, encoding)
    except Exception as err:  # pylint: disable=broad-except
        # the parser has given up entirely; fall back to a byte-level scan
        fancy_logger.get().debug(
            "HTML parser failed on %s (%s), scanning bytes instead", base, err
        )
        return _permissive_scan(html, base)

    links: typing.List[RawLink] = []
    for anchor in soup.find_all("a", href=True):
        href = anchor.get("href")
        if not isinstance(href, str):
            continue
        anchor_text = collapse_whitespace(anchor.get_text(" "))
        links.append(RawLink(href, anchor_text, base, len(links)))
    return links


def extract_page_text(
    html: bytes,
    encoding: typing.Optional[str] = None,
) -> typing.Tuple[str, str]:
    """
    Returns (title, body_text): the content of the title element, and
    the visible text of the page with tags stripped.  Whitespace in
    both is collapsed to single spaces.
    """
    if not html.strip():
        return ("", "")
    try:
        soup = _make_soup(html, encoding)
    except Exception:  # pylint: disable=broad-except
        return ("", "")

    title = ""
    if soup.title is not None:
        title = collapse_whitespace(soup.title.get_text(" "))

    # extract rather than decompose: a <title> may sit inside an
    # already-removed <head>
    for element in soup.find_all(INVISIBLE_ELEMENTS):
        element.extract()
    body_text = collapse_whitespace(soup.get_text(" "))

    return (title, body_text)
