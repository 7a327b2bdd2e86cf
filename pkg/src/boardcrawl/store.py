# -*- coding: utf-8 -*-
"""
The classified, associated attachment store.

Layout under the store root:

    manifest.json                      what's in the store, and its ranks
    pages/<hash>.json                  one fetched page each
    attachments/<class>/<hash>-<name>.rec
                                       one attachment each, relevance
                                       header first, then the payload
    index.json                         search index (see search.py)

A .rec file is a text header of "key: value" lines in a fixed order,
one empty line, then the original payload bytes, untouched.
"""

import datetime
import hashlib
import json
import os
import re
import threading
import typing
import urllib.parse

from boardcrawl import fancy_logger
from boardcrawl import graph_model
from boardcrawl import ranker

MANIFEST_FILENAME = "manifest.json"
INDEX_FILENAME = "index.json"
PAGES_DIR = "pages"
ATTACHMENTS_DIR = "attachments"
RECORD_SUFFIX = ".rec"

MANIFEST_VERSION = 1
RECORD_VERSION = "1"

HEADER_KEYS = (
    "boardcrawl-record",
    "url",
    "class",
    "attachrank",
    "containing-pages",
    "anchor-text",
    "fetched-at",
    "payload-sha256",
    "payload-length",
)

# containing pages are comma-separated, so commas inside a URL
# (and the escape character itself) must be quoted
_PAGE_LIST_SAFE_CHARS = "/:@!$&'()*+;=-._~?"

_UNSAFE_FILENAME_CHARS = re.compile(r"[^A-Za-z0-9._-]+")
MAX_FILENAME_STEM = 80


class StoreError(Exception):
    """
    Raised when the store can't be read or written.
    """

    def __init__(self, message: str, path: typing.Optional[str] = None):
        self.path = path
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)


class CorruptRecordError(StoreError):
    """
    Raised when a .rec file doesn't parse, or its payload doesn't
    match its digest.  `field` names the header field at fault.
    """

    def __init__(self, path: str, field: str, message: str):
        self.field = field
        super().__init__(f"Corrupt record, field '{field}': {message}", path)


def payload_digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def url_hash(url: str) -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()[:16]


def format_timestamp(when: datetime.datetime) -> str:
    if when.tzinfo is None:
        when = when.replace(tzinfo=datetime.timezone.utc)
    return when.astimezone(datetime.timezone.utc).isoformat(timespec="microseconds")


def parse_timestamp(text: str) -> datetime.datetime:
    return datetime.datetime.fromisoformat(text)


class RecordHeader:
    """
    The relevance header of one stored attachment.
    """

    def __init__(
        self,
        attachment_id: graph_model.AttachmentId,
        attachment_class: graph_model.AttachmentClass,
        ar: float,
        containing_pages: typing.Sequence[graph_model.PageId],
        anchor_text: str,
        fetched_at: datetime.datetime,
        payload_sha256: str,
        payload_length: int,
    ):
        self.id = attachment_id
        self.attachment_class = attachment_class
        self.ar = ar
        self.containing_pages = tuple(containing_pages)
        self.anchor_text = anchor_text
        self.fetched_at = fetched_at
        self.payload_sha256 = payload_sha256
        self.payload_length = payload_length

    def encode(self) -> bytes:
        values = (
            RECORD_VERSION,
            self.id.value,
            str(self.attachment_class),
            format(self.ar, ".17g"),
            ",".join(
                urllib.parse.quote(page.value, safe=_PAGE_LIST_SAFE_CHARS)
                for page in self.containing_pages
            ),
            urllib.parse.quote(self.anchor_text, safe=""),
            format_timestamp(self.fetched_at),
            self.payload_sha256,
            str(self.payload_length),
        )
        lines = [f"{key}: {value}\n" for key, value in zip(HEADER_KEYS, values)]
        return ("".join(lines) + "\n").encode("utf-8")

    @classmethod
    def decode(cls, path: str, lines: typing.List[str]) -> "RecordHeader":
        fields: typing.Dict[str, str] = {}
        for position, key in enumerate(HEADER_KEYS):
            if position >= len(lines):
                raise CorruptRecordError(path, key, "missing")
            found_key, sep, value = lines[position].partition(": ")
            if not sep and lines[position] == f"{key}:":
                found_key, value = key, ""
            if found_key != key:
                raise CorruptRecordError(
                    path, key, f"expected '{key}', found '{found_key}'"
                )
            fields[key] = value
        if len(lines) > len(HEADER_KEYS):
            raise CorruptRecordError(
                path, lines[len(HEADER_KEYS)].partition(":")[0], "unexpected field"
            )

        if fields["boardcrawl-record"] != RECORD_VERSION:
            raise CorruptRecordError(
                path,
                "boardcrawl-record",
                f"unknown version {fields['boardcrawl-record']}",
            )

        def parsed(key: str, fn_parse: typing.Callable[[str], typing.Any]):
            try:
                return fn_parse(fields[key])
            except ValueError as err:
                raise CorruptRecordError(path, key, str(err)) from err

        page_list = fields["containing-pages"]
        return cls(
            attachment_id=graph_model.AttachmentId(fields["url"]),
            attachment_class=parsed("class", graph_model.AttachmentClass),
            ar=parsed("attachrank", float),
            containing_pages=[
                graph_model.PageId(urllib.parse.unquote(page))
                for page in (page_list.split(",") if page_list else [])
            ],
            anchor_text=urllib.parse.unquote(fields["anchor-text"]),
            fetched_at=parsed("fetched-at", parse_timestamp),
            payload_sha256=fields["payload-sha256"],
            payload_length=parsed("payload-length", int),
        )


class AttachmentRecord:
    """
    One attachment with its relevance information, ready for the
    store.  The digest is computed from the payload unless given.
    """

    def __init__(
        self,
        attachment_id: graph_model.AttachmentId,
        attachment_class: graph_model.AttachmentClass,
        ar: float,
        containing_pages: typing.Sequence[graph_model.PageId],
        anchor_text: str,
        fetched_at: datetime.datetime,
        payload: bytes,
        payload_sha256: typing.Optional[str] = None,
    ):
        self.id = attachment_id
        self.attachment_class = attachment_class
        self.ar = ar
        self.containing_pages = tuple(containing_pages)
        self.anchor_text = anchor_text
        self.fetched_at = fetched_at
        self.payload = payload
        self.payload_sha256 = payload_sha256 or payload_digest(payload)

    @property
    def header(self) -> RecordHeader:
        return RecordHeader(
            attachment_id=self.id,
            attachment_class=self.attachment_class,
            ar=self.ar,
            containing_pages=self.containing_pages,
            anchor_text=self.anchor_text,
            fetched_at=self.fetched_at,
            payload_sha256=self.payload_sha256,
            payload_length=len(self.payload),
        )

    def with_rank(
        self,
        ar: float,
        containing_pages: typing.Sequence[graph_model.PageId],
    ) -> "AttachmentRecord":
        return AttachmentRecord(
            attachment_id=self.id,
            attachment_class=self.attachment_class,
            ar=ar,
            containing_pages=containing_pages,
            anchor_text=self.anchor_text,
            fetched_at=self.fetched_at,
            payload=self.payload,
            payload_sha256=self.payload_sha256,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttachmentRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.attachment_class == other.attachment_class
            and self.ar == other.ar
            and self.containing_pages == other.containing_pages
            and self.anchor_text == other.anchor_text
            and self.fetched_at == other.fetched_at
            and self.payload == other.payload
            and self.payload_sha256 == other.payload_sha256
        )

    def __repr__(self) -> str:
        return (
            f"AttachmentRecord({self.id.value!r}, {self.attachment_class}, "
            + f"ar={self.ar!r}, {len(self.payload)} bytes)"
        )


def record_filename(attachment_id: graph_model.AttachmentId) -> str:
    basename = urllib.parse.unquote(
        urllib.parse.urlsplit(attachment_id.value).path.rsplit("/", 1)[-1]
    )
    stem = _UNSAFE_FILENAME_CHARS.sub("_", basename).strip("._")[:MAX_FILENAME_STEM]
    name = url_hash(attachment_id.value)
    if stem:
        name += "-" + stem
    return name + RECORD_SUFFIX


def record_relative_path(
    attachment_id: graph_model.AttachmentId,
    attachment_class: graph_model.AttachmentClass,
) -> str:
    return "/".join(
        (ATTACHMENTS_DIR, str(attachment_class), record_filename(attachment_id))
    )


def page_relative_path(page_id: graph_model.PageId) -> str:
    return f"{PAGES_DIR}/{url_hash(page_id.value)}.json"


def write_attachment_record(root: str, record: AttachmentRecord) -> str:
    """
    Writes record under attachments/<class>/ and returns its path
    relative to root.
    """
    if payload_digest(record.payload) != record.payload_sha256:
        raise StoreError(f"Payload of {record.id} does not match its digest")
    relative = record_relative_path(record.id, record.attachment_class)
    path = os.path.join(root, *relative.split("/"))
    try:
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as file:
            file.write(record.header.encode())
            file.write(record.payload)
    except OSError as err:
        raise StoreError("Could not write attachment record", path) from err
    return relative


def _read_header_lines(
    path: str, file: typing.BinaryIO
) -> typing.Tuple[typing.List[str], int]:
    lines: typing.List[str] = []
    consumed = 0
    while True:
        raw = file.readline()
        if not raw:
            raise CorruptRecordError(path, "header", "no end-of-header line")
        consumed += len(raw)
        if raw == b"\n":
            return lines, consumed
        try:
            lines.append(raw.decode("utf-8").rstrip("\n"))
        except UnicodeDecodeError as err:
            raise CorruptRecordError(path, "header", "not UTF-8") from err
        if len(lines) > len(HEADER_KEYS):
            raise CorruptRecordError(path, "header", "no end-of-header line")


def read_attachment_header(path: str) -> RecordHeader:
    """
    Reads just the relevance header of a .rec file.
    """
    try:
        with open(path, "rb") as file:
            lines, _ = _read_header_lines(path, file)
    except OSError as err:
        raise StoreError("Could not read attachment record", path) from err
    return RecordHeader.decode(path, lines)


def read_attachment_record(path: str) -> AttachmentRecord:
    """
    Reads a .rec file back.  The exact inverse of
    write_attachment_record().

    Raises CorruptRecordError if the header is malformed, or the
    payload's length or digest doesn't match it.
    """
    try:
        with open(path, "rb") as file:
            lines, _ = _read_header_lines(path, file)
            payload = file.read()
    except OSError as err:
        raise StoreError("Could not read attachment record", path) from err

    header = RecordHeader.decode(path, lines)
    if len(payload) != header.payload_length:
        raise CorruptRecordError(
            path,
            "payload-length",
            f"header says {header.payload_length} bytes, found {len(payload)}",
        )
    if payload_digest(payload) != header.payload_sha256:
        raise CorruptRecordError(path, "payload-sha256", "digest mismatch")

    return AttachmentRecord(
        attachment_id=header.id,
        attachment_class=header.attachment_class,
        ar=header.ar,
        containing_pages=header.containing_pages,
        anchor_text=header.anchor_text,
        fetched_at=header.fetched_at,
        payload=payload,
        payload_sha256=header.payload_sha256,
    )


def page_to_json(page: graph_model.PageRecord) -> typing.Dict[str, typing.Any]:
    return {
        "id": page.id.value,
        "title": page.title,
        "body_text": page.body_text,
        "fetched_at": format_timestamp(page.fetched_at),
        "http_status": page.http_status,
        "outlinks": [link.value for link in page.outlinks],
        "attachments": [attachment.value for attachment in page.attachments],
    }


def page_from_json(data: typing.Mapping[str, typing.Any]) -> graph_model.PageRecord:
    return graph_model.PageRecord(
        page_id=graph_model.PageId(data["id"]),
        title=data["title"],
        body_text=data["body_text"],
        fetched_at=parse_timestamp(data["fetched_at"]),
        http_status=int(data["http_status"]),
        outlinks=[graph_model.PageId(link) for link in data["outlinks"]],
        attachments=[graph_model.AttachmentId(a) for a in data["attachments"]],
    )


def _dump_json(data: typing.Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class PageEntry:
    __slots__ = ("id", "title", "path", "pagerank")

    def __init__(
        self,
        page_id: graph_model.PageId,
        title: str,
        path: str,
        pagerank: typing.Optional[float] = None,
    ):
        self.id = page_id
        self.title = title
        self.path = path
        self.pagerank = pagerank


class AttachmentEntry:
    __slots__ = ("id", "attachment_class", "ar", "path")

    def __init__(
        self,
        attachment_id: graph_model.AttachmentId,
        attachment_class: graph_model.AttachmentClass,
        ar: float,
        path: str,
    ):
        self.id = attachment_id
        self.attachment_class = attachment_class
        self.ar = ar
        self.path = path


class StoreManifest:
    """
    Index of everything in a store: pages with their PageRank,
    attachments with their class, AttachRank and record path, and
    the rank configuration the ranks came from.
    """

    def __init__(self):
        self.version = MANIFEST_VERSION
        self.pages: typing.Dict[graph_model.PageId, PageEntry] = {}
        self.attachments: typing.Dict[graph_model.AttachmentId, AttachmentEntry] = {}
        self.rank_config: typing.Optional[ranker.RankConfig] = None
        self.ranking: typing.Optional[typing.Dict[str, typing.Any]] = None

    def class_counts(self) -> typing.Dict[str, int]:
        counts: typing.Dict[str, int] = {}
        for entry in self.attachments.values():
            key = str(entry.attachment_class)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "version": self.version,
            "rank_config": self.rank_config.as_dict() if self.rank_config else None,
            "ranking": self.ranking,
            "pages": [
                {
                    "id": entry.id.value,
                    "title": entry.title,
                    "path": entry.path,
                    "pagerank": entry.pagerank,
                }
                for _, entry in sorted(self.pages.items())
            ],
            "attachments": [
                {
                    "id": entry.id.value,
                    "class": str(entry.attachment_class),
                    "ar": entry.ar,
                    "path": entry.path,
                }
                for _, entry in sorted(self.attachments.items())
            ],
        }

    def dumps(self) -> str:
        return _dump_json(self.to_json())

    @classmethod
    def from_json(
        cls, data: typing.Mapping[str, typing.Any], path: str
    ) -> "StoreManifest":
        manifest = cls()
        try:
            version = int(data["version"])
            if version != MANIFEST_VERSION:
                raise StoreError(f"Unsupported manifest version {version}", path)
            if data.get("rank_config"):
                manifest.rank_config = ranker.RankConfig.from_dict(data["rank_config"])
            manifest.ranking = data.get("ranking")
            for item in data["pages"]:
                page_id = graph_model.PageId(item["id"])
                manifest.pages[page_id] = PageEntry(
                    page_id, item["title"], item["path"], item.get("pagerank")
                )
            for item in data["attachments"]:
                attachment_id = graph_model.AttachmentId(item["id"])
                manifest.attachments[attachment_id] = AttachmentEntry(
                    attachment_id,
                    graph_model.AttachmentClass(item["class"]),
                    float(item["ar"]),
                    item["path"],
                )
        except (KeyError, TypeError, ValueError, ranker.RankError) as err:
            raise StoreError(f"Malformed manifest ({err})", path) from err
        return manifest


class BoardStore:
    """
    Purpose: reads and writes one store directory.

    All writes go through a single lock.  Use as a context manager to
    have the manifest flushed on a clean exit.
    """

    def __init__(self, root: str, create: bool = False):
        self.root = root
        self._lock = threading.Lock()
        self.manifest = StoreManifest()

        manifest_path = self.path(MANIFEST_FILENAME)
        if os.path.isfile(manifest_path):
            self.manifest = self._load_manifest(manifest_path)
        elif not create:
            raise StoreError("No store found (missing manifest.json)", root)
        else:
            try:
                os.makedirs(root, exist_ok=True)
            except OSError as err:
                raise StoreError("Could not create store directory", root) from err

    def __enter__(self) -> "BoardStore":
        return self

    def __exit__(self, exc_type, *_err) -> None:
        if exc_type is None:
            self.flush()

    def path(self, relative: str) -> str:
        return os.path.join(self.root, *relative.split("/"))

    @staticmethod
    def _load_manifest(path: str) -> StoreManifest:
        try:
            with open(path, "r", encoding="utf-8") as file:
                data = json.load(file)
        except (OSError, ValueError) as err:
            raise StoreError("Could not read manifest", path) from err
        return StoreManifest.from_json(data, path)

    def flush(self) -> None:
        """
        Writes the manifest.
        """
        with self._lock:
            self._write_text(MANIFEST_FILENAME, self.manifest.dumps())

    def manifest_digest(self) -> str:
        return hashlib.sha256(self.manifest.dumps().encode("utf-8")).hexdigest()

    def _write_text(self, relative: str, text: str) -> None:
        path = self.path(relative)
        try:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as file:
                file.write(text)
        except OSError as err:
            raise StoreError("Could not write", path) from err

    def clear(self) -> None:
        """
        Removes every page and record the manifest lists, and starts
        an empty manifest.  Files the store didn't write are left alone.
        """
        with self._lock:
            listed = [entry.path for entry in self.manifest.pages.values()]
            listed += [entry.path for entry in self.manifest.attachments.values()]
            listed.append(INDEX_FILENAME)
            for relative in listed:
                try:
                    os.remove(self.path(relative))
                except FileNotFoundError:
                    pass
                except OSError as err:
                    raise StoreError("Could not remove", self.path(relative)) from err
            self.manifest = StoreManifest()

    def store_page(self, page: graph_model.PageRecord) -> str:
        """
        Persists page under pages/ and lists it in the manifest.
        Storing the same page id again overwrites it.
        """
        relative = page_relative_path(page.id)
        with self._lock:
            self._write_text(relative, _dump_json(page_to_json(page)))
            previous = self.manifest.pages.get(page.id)
            self.manifest.pages[page.id] = PageEntry(
                page.id,
                page.title,
                relative,
                previous.pagerank if previous else None,
            )
        return relative

    def load_page(self, page_id: graph_model.PageId) -> graph_model.PageRecord:
        entry = self.manifest.pages.get(page_id)
        if entry is None:
            raise StoreError(f"Page {page_id} is not in the store", self.root)
        path = self.path(entry.path)
        try:
            with open(path, "r", encoding="utf-8") as file:
                return page_from_json(json.load(file))
        except (OSError, ValueError, KeyError, TypeError) as err:
            raise StoreError("Could not read page", path) from err

    def load_pages(self) -> typing.List[graph_model.PageRecord]:
        return [self.load_page(page_id) for page_id in sorted(self.manifest.pages)]

    def write_attachment_record(self, record: AttachmentRecord) -> str:
        """
        Writes record into its class directory and lists it in the
        manifest.
        """
        with self._lock:
            previous = self.manifest.attachments.get(record.id)
            relative = write_attachment_record(self.root, record)
            if previous is not None and previous.path != relative:
                # the attachment changed class since the last write
                try:
                    os.remove(self.path(previous.path))
                except FileNotFoundError:
                    pass
            self.manifest.attachments[record.id] = AttachmentEntry(
                record.id, record.attachment_class, record.ar, relative
            )
        return relative

    def read_attachment_record(
        self, attachment_id: graph_model.AttachmentId
    ) -> AttachmentRecord:
        entry = self.manifest.attachments.get(attachment_id)
        if entry is None:
            raise StoreError(
                f"Attachment {attachment_id} is not in the store", self.root
            )
        return read_attachment_record(self.path(entry.path))

    def read_attachment_header(
        self, attachment_id: graph_model.AttachmentId
    ) -> RecordHeader:
        entry = self.manifest.attachments.get(attachment_id)
        if entry is None:
            raise StoreError(
                f"Attachment {attachment_id} is not in the store", self.root
            )
        return read_attachment_header(self.path(entry.path))

    def set_ranks(
        self,
        ranks: ranker.RankVector,
        config: ranker.RankConfig,
    ) -> None:
        """
        Records page ranks and the configuration they came from.
        """
        with self._lock:
            for page_id, entry in self.manifest.pages.items():
                entry.pagerank = ranks.values.get(page_id)
            self.manifest.rank_config = config
            self.manifest.ranking = {
                "iterations_used": ranks.iterations_used,
                "final_residual": ranks.final_residual,
                "converged": ranks.converged,
            }

    def _files_on_disk(self, subdir: str, suffix: str) -> typing.Set[str]:
        found: typing.Set[str] = set()
        top = self.path(subdir)
        for dirpath, _, filenames in os.walk(top):
            for filename in filenames:
                if not filename.endswith(suffix):
                    continue
                full = os.path.join(dirpath, filename)
                relative = os.path.relpath(full, self.root)
                found.add(relative.replace(os.sep, "/"))
        return found

    def verify(self) -> typing.List[str]:
        """
        Audits the store and returns a list of findings, empty when
        the store is sound:
          - manifest and disk list the same pages and records
          - each record sits in its class directory and round-trips
            with a matching digest
          - manifest and header agree on each attachment's rank
          - each rank is the highest PageRank among its containing pages
        """
        findings: typing.List[str] = []
        manifest = self.manifest

        listed_pages = {entry.path for entry in manifest.pages.values()}
        for relative in sorted(self._files_on_disk(PAGES_DIR, ".json") - listed_pages):
            findings.append(f"page file not in manifest: {relative}")
        for page_id, entry in sorted(manifest.pages.items()):
            try:
                page = self.load_page(page_id)
            except StoreError as err:
                findings.append(str(err))
                continue
            if page.id != page_id:
                findings.append(
                    f"page file {entry.path} holds {page.id}, not {page_id}"
                )

        listed_records = {entry.path for entry in manifest.attachments.values()}
        on_disk = self._files_on_disk(ATTACHMENTS_DIR, RECORD_SUFFIX)
        for relative in sorted(on_disk - listed_records):
            findings.append(f"record not in manifest: {relative}")

        for attachment_id, entry in sorted(manifest.attachments.items()):
            expected_dir = f"{ATTACHMENTS_DIR}/{entry.attachment_class}/"
            if not entry.path.startswith(expected_dir):
                findings.append(f"{attachment_id}: record outside {expected_dir}")
            try:
                record = read_attachment_record(self.path(entry.path))
            except StoreError as err:
                findings.append(str(err))
                continue
            if record.id != attachment_id:
                findings.append(f"{entry.path}: header url is {record.id}")
            if record.attachment_class != entry.attachment_class:
                findings.append(
                    f"{attachment_id}: class {record.attachment_class} in header, "
                    + f"{entry.attachment_class} in manifest"
                )
            if record.ar != entry.ar:
                findings.append(
                    f"{attachment_id}: attachrank {record.ar!r} in header, "
                    + f"{entry.ar!r} in manifest"
                )
            page_ranks = [
                manifest.pages[page].pagerank
                for page in record.containing_pages
                if page in manifest.pages
            ]
            if len(page_ranks) != len(record.containing_pages):
                findings.append(f"{attachment_id}: containing page missing from store")
            elif None not in page_ranks and record.ar != max(page_ranks):
                findings.append(
                    f"{attachment_id}: attachrank {record.ar!r} is not the highest "
                    + "PageRank of its containing pages"
                )

        if findings:
            fancy_logger.get().warning(
                "Store %s has %d problem(s)", self.root, len(findings)
            )
        else:
            fancy_logger.get().info(
                "Store %s is consistent: %d page(s), %d attachment(s)",
                self.root,
                len(manifest.pages),
                len(manifest.attachments),
            )
        return findings
