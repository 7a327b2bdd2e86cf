# -*- coding: utf-8 -*-
"""
Decides what each normalized hyperlink is: an attachment (and of
which class), another page to crawl, or something to throw away.

Classification looks at the suffix of the URL's final path segment
only, driven by a SuffixTable that can be extended from a YAML
config file.
"""

import typing

import ruamel.yaml as ryaml

from boardcrawl import fancy_logger
from boardcrawl import graph_model
from boardcrawl import scanner

AttachmentClass = graph_model.AttachmentClass


class SuffixTableError(Exception):
    """
    Raised when a suffix table is inconsistent, or a suffix table
    file can't be read.
    """


DEFAULT_ATTACHMENT_SUFFIXES: typing.Dict[AttachmentClass, typing.List[str]] = {
    AttachmentClass.DOCUMENT: ["doc", "docx", "pdf", "rtf"],
    AttachmentClass.SPREADSHEET: ["xls", "xlsx", "csv"],
    AttachmentClass.PRESENTATION: ["ppt", "pptx"],
    AttachmentClass.TEXT: ["txt"],
    AttachmentClass.ARCHIVE: ["zip", "rar", "7z", "tar", "gz"],
    AttachmentClass.IMAGE: ["jpg", "jpeg", "png", "gif", "bmp"],
}

# the empty suffix (no dot in the last segment) is a page
DEFAULT_PAGE_SUFFIXES: typing.List[str] = [
    "html",
    "htm",
    "php",
    "asp",
    "aspx",
    "jsp",
    "nsf",
    "",
]


class SuffixTable:
    """
    Maps lowercase suffixes to attachment classes, plus the set of
    suffixes that mark pages.  The two key sets never overlap.
    """

    def __init__(
        self,
        attachment_suffixes: typing.Mapping[str, AttachmentClass],
        page_suffixes: typing.Iterable[str],
    ):
        self._attachment_suffixes = {
            suffix.lower(): AttachmentClass(cls)
            for suffix, cls in attachment_suffixes.items()
        }
        self._page_suffixes = frozenset(suffix.lower() for suffix in page_suffixes)

        overlap = self._page_suffixes.intersection(self._attachment_suffixes)
        if overlap:
            raise SuffixTableError(
                "Suffixes listed both as pages and as attachments: "
                + ", ".join(sorted(overlap))
            )

    @classmethod
    def default(cls) -> "SuffixTable":
        return cls.from_class_lists(DEFAULT_ATTACHMENT_SUFFIXES, DEFAULT_PAGE_SUFFIXES)

    @classmethod
    def from_class_lists(
        cls,
        class_suffixes: typing.Mapping[typing.Any, typing.Iterable[str]],
        page_suffixes: typing.Iterable[str],
    ) -> "SuffixTable":
        """
        Builds a table from {class name: [suffix, ...]}, the shape used
        in config files.
        """
        attachment_suffixes: typing.Dict[str, AttachmentClass] = {}
        for class_name, suffixes in class_suffixes.items():
            try:
                attachment_class = AttachmentClass(str(class_name).lower())
            except ValueError as err:
                raise SuffixTableError(
                    f"Unknown attachment class '{class_name}', expected one of: "
                    + ", ".join(str(c) for c in AttachmentClass)
                ) from err
            for suffix in suffixes or []:
                suffix = str(suffix).lower().lstrip(".")
                previous = attachment_suffixes.get(suffix)
                if previous is not None and previous != attachment_class:
                    raise SuffixTableError(
                        f"Suffix '{suffix}' mapped to both {previous} "
                        + f"and {attachment_class}"
                    )
                attachment_suffixes[suffix] = attachment_class
        return cls(
            attachment_suffixes,
            [str(s).lower().lstrip(".") for s in page_suffixes],
        )

    @property
    def page_suffixes(self) -> typing.FrozenSet[str]:
        return self._page_suffixes

    def attachment_class(self, suffix: str) -> typing.Optional[AttachmentClass]:
        return self._attachment_suffixes.get(suffix.lower())

    def is_page_suffix(self, suffix: str) -> bool:
        return suffix.lower() in self._page_suffixes

    def with_overrides(
        self,
        class_suffixes: typing.Mapping[typing.Any, typing.Iterable[str]],
        page_suffixes: typing.Optional[typing.Iterable[str]] = None,
    ) -> "SuffixTable":
        """
        Returns a new table with the given mappings layered over this
        one.  A suffix moved to a new class leaves its old class; a
        suffix declared as an attachment stops being a page suffix.
        """
        overrides = SuffixTable.from_class_lists(class_suffixes, page_suffixes or [])
        merged = dict(self._attachment_suffixes)
        merged.update(overrides._attachment_suffixes)
        pages = set(self._page_suffixes) | set(overrides._page_suffixes)
        for suffix in overrides._page_suffixes:
            merged.pop(suffix, None)
        pages -= set(overrides._attachment_suffixes)
        return SuffixTable(merged, pages)

    def as_class_lists(self) -> typing.Dict[str, typing.List[str]]:
        result: typing.Dict[str, typing.List[str]] = {}
        for suffix, attachment_class in sorted(self._attachment_suffixes.items()):
            result.setdefault(str(attachment_class), []).append(suffix)
        return result


def load_suffix_table(
    filename: str,
    base: typing.Optional[SuffixTable] = None,
) -> SuffixTable:
    """
    Loads suffix overrides from a YAML (or JSON) file of the form:

        attachments:
          document: [doc, odt]
          spreadsheet: [ods]
        pages: [cfm]

    and layers them over base (the default table if not given).
    """
    if base is None:
        base = SuffixTable.default()
    try:
        with open(filename, "r", encoding="utf-8") as file:
            yaml = ryaml.YAML(typ="safe")
            data = yaml.load(file)
    except (OSError, ryaml.YAMLError) as err:
        raise SuffixTableError(f"Could not read suffix table {filename}") from err

    if data is None:
        return base
    if not isinstance(data, dict):
        raise SuffixTableError(f"Suffix table {filename} must be a mapping")
    fancy_logger.get().debug("Loaded suffix overrides from %s", filename)
    return base.with_overrides(
        data.get("attachments") or {},
        data.get("pages") or [],
    )


class LinkDecision:
    """
    What to do with one hyperlink.  Exactly one of the three variants
    below.
    """

    def __eq__(self, other: object) -> bool:
        if type(self) is not type(other):
            return NotImplemented
        return self.__dict__ == other.__dict__

    def __hash__(self) -> int:
        return hash((type(self).__name__,) + tuple(sorted(self.__dict__.items())))


class Page(LinkDecision):
    """
    The link leads to another page; store it for crawling.
    """

    def __init__(self, page_id: graph_model.PageId):
        self.page_id = page_id

    def __repr__(self) -> str:
        return f"Page({self.page_id})"


class Attachment(LinkDecision):
    """
    The link leads to an attachment of the given class.
    """

    def __init__(
        self,
        attachment_id: graph_model.AttachmentId,
        attachment_class: AttachmentClass,
    ):
        self.attachment_id = attachment_id
        self.attachment_class = attachment_class

    def __repr__(self) -> str:
        return f"Attachment({self.attachment_id}, {self.attachment_class})"


class Discard(LinkDecision):
    """
    The link can't be crawled; throw it away.
    """

    def __init__(self, reason: str):
        self.reason = reason

    def __repr__(self) -> str:
        return f"Discard({self.reason!r})"


def _is_pathlike(url: str) -> bool:
    path = url.split("?", 1)[0].split("#", 1)[0]
    return path.endswith("/")


def classify_link(
    url: typing.Union[graph_model.PageId, scanner.NotFetchableUrl],
    table: SuffixTable,
) -> LinkDecision:
    """
    Classifies a normalize_url() result:
     - rejected URLs are discarded
     - a suffix in the attachment table is an attachment of that class
     - a page suffix, or a path ending in a slash, is a page
     - any other suffix is an attachment of class `other`
    """
    if isinstance(url, scanner.NotFetchableUrl):
        return Discard(url.reason)

    text = url.value
    if _is_pathlike(text):
        return Page(url)

    suffix = graph_model.url_suffix(text)
    attachment_class = table.attachment_class(suffix)
    if attachment_class is not None:
        return Attachment(graph_model.AttachmentId(text), attachment_class)
    if table.is_page_suffix(suffix):
        return Page(url)
    return Attachment(graph_model.AttachmentId(text), AttachmentClass.OTHER)
