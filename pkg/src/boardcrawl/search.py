# -*- coding: utf-8 -*-
"""
Searches the stored attachments.

Attachment payloads aren't parsed; each attachment is indexed over
the text around it instead: its anchor text plus the titles and body
text of every page containing it.  Lexical scores are TF-IDF sums,

    score(id) = sum(tf(t, id) * ln(1 + N / df(t)) for each query term t)

and AttachRank lifts them by

    final(id) = score(id) * (1 + ar_weight * ar(id) / max ar)

so an ar_weight of 0 gives pure lexical ranking.
"""

import json
import math
import os
import re
import typing

from boardcrawl import fancy_logger
from boardcrawl import graph_model
from boardcrawl import store

INDEX_VERSION = 1

TOKEN_PATTERN = re.compile(r"[^\W_]+")
MIN_TOKEN_LENGTH = 2
SNIPPET_LENGTH = 120

DEFAULT_STOPWORDS: typing.FrozenSet[str] = frozenset(
    (
        "is a for the and of to in it this that was are "
        + "be as at by we or an on with you he she they "
        + "but from has had have not their its if do did so "
        + "can will all been more also about into than then "
        + "there when which would could should one two may each "
        + "other such after before between through during over"
    ).split()
)


class SearchError(Exception):
    """
    Base class for failures while building or querying an index.
    """


class EmptyQueryError(SearchError):
    """
    The query has no searchable terms left after tokenizing.
    """


class IndexBuildError(SearchError):
    """
    Files the manifest refers to are missing or unreadable.
    """

    def __init__(self, missing_paths: typing.List[str]):
        self.missing_paths = missing_paths
        super().__init__(
            "Cannot build index, missing or unreadable: " + ", ".join(missing_paths)
        )


def tokenize(
    text: str,
    stopwords: typing.AbstractSet[str] = DEFAULT_STOPWORDS,
) -> typing.List[str]:
    """
    Lowercases text and splits it on runs of anything that isn't a
    letter or digit.  Drops one-character tokens and stopwords.
    """
    return [
        token
        for token in TOKEN_PATTERN.findall(text.lower())
        if len(token) >= MIN_TOKEN_LENGTH and token not in stopwords
    ]


class IndexedDocument:
    """
    Per-attachment statistics kept by the index.

    `provenance` names where the indexed text came from: "anchor",
    then the URL of every containing page.
    """

    def __init__(
        self,
        attachment_id: graph_model.AttachmentId,
        attachment_class: graph_model.AttachmentClass,
        token_count: int,
        provenance: typing.Sequence[str],
        containing_page: typing.Optional[graph_model.PageId],
        snippet: str,
    ):
        self.id = attachment_id
        self.attachment_class = attachment_class
        self.token_count = token_count
        self.provenance = tuple(provenance)
        self.containing_page = containing_page
        self.snippet = snippet

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "id": self.id.value,
            "class": str(self.attachment_class),
            "token_count": self.token_count,
            "provenance": list(self.provenance),
            "containing_page": (
                self.containing_page.value if self.containing_page else None
            ),
            "snippet": self.snippet,
        }

    @classmethod
    def from_json(cls, data: typing.Mapping[str, typing.Any]) -> "IndexedDocument":
        page = data.get("containing_page")
        return cls(
            attachment_id=graph_model.AttachmentId(data["id"]),
            attachment_class=graph_model.AttachmentClass(data["class"]),
            token_count=int(data["token_count"]),
            provenance=data["provenance"],
            containing_page=graph_model.PageId(page) if page else None,
            snippet=data["snippet"],
        )


class SearchIndex:
    """
    Inverted index over the store's attachments.  Immutable once
    built.
    """

    def __init__(
        self,
        postings: typing.Dict[str, typing.Dict[graph_model.AttachmentId, int]],
        documents: typing.Dict[graph_model.AttachmentId, IndexedDocument],
        ar_values: typing.Dict[graph_model.AttachmentId, float],
        stopwords: typing.AbstractSet[str] = DEFAULT_STOPWORDS,
    ):
        for term, frequencies in postings.items():
            for attachment_id, tf in frequencies.items():
                if tf < 1 or attachment_id not in documents:
                    raise SearchError(f"Bad posting for '{term}': {attachment_id}")
        missing_ar = set(documents) - set(ar_values)
        if missing_ar:
            raise SearchError(f"{len(missing_ar)} document(s) have no attachrank")
        self._postings = postings
        self._documents = documents
        self._ar_values = ar_values
        self._stopwords = frozenset(stopwords)
        self._max_ar = max(ar_values.values(), default=0.0)

    @property
    def doc_count(self) -> int:
        return len(self._documents)

    @property
    def documents(self) -> typing.Mapping[graph_model.AttachmentId, IndexedDocument]:
        return self._documents

    @property
    def ar_values(self) -> typing.Mapping[graph_model.AttachmentId, float]:
        return self._ar_values

    @property
    def stopwords(self) -> typing.FrozenSet[str]:
        return self._stopwords

    @property
    def max_ar(self) -> float:
        return self._max_ar

    def postings(
        self, term: str
    ) -> typing.List[typing.Tuple[graph_model.AttachmentId, int]]:
        """
        Returns (attachment id, term frequency) pairs in id order.
        """
        return sorted(self._postings.get(term, {}).items())

    def terms(self) -> typing.List[str]:
        return sorted(self._postings)

    def tf(self, term: str, attachment_id: graph_model.AttachmentId) -> int:
        return self._postings.get(term, {}).get(attachment_id, 0)

    def df(self, term: str) -> int:
        return len(self._postings.get(term, {}))

    def to_json(self, manifest_sha256: str) -> typing.Dict[str, typing.Any]:
        return {
            "version": INDEX_VERSION,
            "manifest_sha256": manifest_sha256,
            "stopwords": sorted(self._stopwords),
            "documents": [
                dict(doc.to_json(), ar=self._ar_values[attachment_id])
                for attachment_id, doc in sorted(self._documents.items())
            ],
            "postings": {
                term: [[a.value, tf] for a, tf in self.postings(term)]
                for term in self.terms()
            },
        }

    @classmethod
    def from_json(cls, data: typing.Mapping[str, typing.Any]) -> "SearchIndex":
        documents: typing.Dict[graph_model.AttachmentId, IndexedDocument] = {}
        ar_values: typing.Dict[graph_model.AttachmentId, float] = {}
        for item in data["documents"]:
            doc = IndexedDocument.from_json(item)
            documents[doc.id] = doc
            ar_values[doc.id] = float(item["ar"])
        postings = {
            term: {graph_model.AttachmentId(a): int(tf) for a, tf in pairs}
            for term, pairs in data["postings"].items()
        }
        return cls(postings, documents, ar_values, stopwords=data["stopwords"])


def _best_page(
    pages: typing.Sequence[graph_model.PageId],
    manifest: store.StoreManifest,
) -> typing.Optional[graph_model.PageId]:
    def key(page_id: graph_model.PageId):
        entry = manifest.pages.get(page_id)
        rank = entry.pagerank if entry and entry.pagerank is not None else 0.0
        return (-rank, page_id)

    return min(pages, key=key) if pages else None


def build_index(
    board: store.BoardStore,
    stopwords: typing.Optional[typing.AbstractSet[str]] = None,
) -> SearchIndex:
    """
    Indexes every attachment in the store over its anchor text and
    its containing pages' titles and bodies.

    Raises IndexBuildError listing every referenced file that's
    missing or unreadable.
    """
    if stopwords is None:
        stopwords = DEFAULT_STOPWORDS
    manifest = board.manifest

    missing: typing.List[str] = []
    pages: typing.Dict[graph_model.PageId, graph_model.PageRecord] = {}
    for page_id, entry in sorted(manifest.pages.items()):
        try:
            pages[page_id] = board.load_page(page_id)
        except store.StoreError:
            missing.append(entry.path)

    postings: typing.Dict[str, typing.Dict[graph_model.AttachmentId, int]] = {}
    documents: typing.Dict[graph_model.AttachmentId, IndexedDocument] = {}
    ar_values: typing.Dict[graph_model.AttachmentId, float] = {}
    for attachment_id, entry in sorted(manifest.attachments.items()):
        try:
            header = board.read_attachment_header(attachment_id)
        except store.StoreError:
            missing.append(entry.path)
            continue

        texts = [header.anchor_text]
        provenance = ["anchor"]
        for page_id in header.containing_pages:
            page = pages.get(page_id)
            if page is None:
                if page_id not in manifest.pages:
                    missing.append(f"{page_id} (page of {attachment_id})")
                continue
            texts.extend((page.title, page.body_text))
            provenance.append(page_id.value)

        tokens = tokenize(" ".join(texts), stopwords)
        for token in tokens:
            frequencies = postings.setdefault(token, {})
            frequencies[attachment_id] = frequencies.get(attachment_id, 0) + 1

        best_page = _best_page(header.containing_pages, manifest)
        snippet = ""
        if best_page in pages:
            snippet = pages[best_page].body_text[:SNIPPET_LENGTH]
        documents[attachment_id] = IndexedDocument(
            attachment_id=attachment_id,
            attachment_class=entry.attachment_class,
            token_count=len(tokens),
            provenance=provenance,
            containing_page=best_page,
            snippet=snippet,
        )
        ar_values[attachment_id] = entry.ar

    if missing:
        raise IndexBuildError(missing)

    fancy_logger.get().debug(
        "Indexed %d attachment(s), %d term(s)", len(documents), len(postings)
    )
    return SearchIndex(postings, documents, ar_values, stopwords)


def save_index(index: SearchIndex, path: str, manifest_sha256: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as file:
            json.dump(index.to_json(manifest_sha256), file, sort_keys=True)
            file.write("\n")
    except OSError as err:
        raise SearchError(f"Could not write index {path}") from err


def load_index(path: str, manifest_sha256: str) -> typing.Optional[SearchIndex]:
    """
    Loads a saved index.  Returns None when there is none, or when it
    was built from a different manifest.
    """
    if not os.path.isfile(path):
        return None
    try:
        with open(path, "r", encoding="utf-8") as file:
            data = json.load(file)
        if data.get("version") != INDEX_VERSION:
            return None
        if data.get("manifest_sha256") != manifest_sha256:
            fancy_logger.get().info("Saved index %s is stale, rebuilding", path)
            return None
        return SearchIndex.from_json(data)
    except (OSError, ValueError, KeyError, TypeError, SearchError) as err:
        fancy_logger.get().warning("Ignoring unreadable index %s: %s", path, err)
        return None


def index_for_store(
    board: store.BoardStore,
    stopwords: typing.Optional[typing.AbstractSet[str]] = None,
) -> SearchIndex:
    """
    Returns the store's saved index if it's current, otherwise builds
    one in memory.  Never writes to the store.
    """
    saved = load_index(board.path(store.INDEX_FILENAME), board.manifest_digest())
    if saved is not None and (stopwords is None or saved.stopwords == stopwords):
        return saved
    return build_index(board, stopwords)


def lexical_score(
    index: SearchIndex,
    terms: typing.Iterable[str],
    attachment_id: graph_model.AttachmentId,
) -> float:
    """
    TF-IDF sum over terms.  Terms the index doesn't know add nothing.
    """
    score = 0.0
    for term in terms:
        tf = index.tf(term, attachment_id)
        if tf:
            score += tf * math.log(1 + index.doc_count / index.df(term))
    return score


class ResultRow:
    __slots__ = (
        "attachment_id",
        "lexical_score",
        "final_score",
        "ar",
        "attachment_class",
        "containing_page",
        "snippet",
    )

    def __init__(
        self,
        attachment_id: graph_model.AttachmentId,
        lexical: float,
        final: float,
        ar: float,
        document: IndexedDocument,
    ):
        self.attachment_id = attachment_id
        self.lexical_score = lexical
        self.final_score = final
        self.ar = ar
        self.attachment_class = document.attachment_class
        self.containing_page = document.containing_page
        self.snippet = document.snippet

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "id": self.attachment_id.value,
            "lexical_score": self.lexical_score,
            "final_score": self.final_score,
            "ar": self.ar,
            "class": str(self.attachment_class),
            "containing_page": (
                self.containing_page.value if self.containing_page else None
            ),
            "snippet": self.snippet,
        }


class QueryResult:
    """
    Ranked results, best first.  Ties on final score are broken by
    attachment id.
    """

    def __init__(self, terms: typing.Sequence[str], rows: typing.List[ResultRow]):
        self.terms = tuple(terms)
        self.rows = rows

    def ids(self) -> typing.List[graph_model.AttachmentId]:
        return [row.attachment_id for row in self.rows]

    def __iter__(self) -> typing.Iterator[ResultRow]:
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)


def query(
    index: SearchIndex,
    text: str,
    k: int = 10,
    ar_weight: float = 1.0,
    classes: typing.Optional[typing.AbstractSet[graph_model.AttachmentClass]] = None,
) -> QueryResult:
    """
    Returns the top k attachments matching text.  Only attachments
    with a positive lexical score are returned.  classes, when given,
    restricts results to those attachment classes.

    Raises EmptyQueryError if text has no searchable terms.
    """
    if k < 1:
        raise SearchError(f"k must be at least 1, got {k}")
    terms = list(dict.fromkeys(tokenize(text, index.stopwords)))
    if not terms:
        raise EmptyQueryError(f"No searchable terms in query {text!r}")

    candidates: typing.Set[graph_model.AttachmentId] = set()
    for term in terms:
        candidates.update(attachment_id for attachment_id, _ in index.postings(term))

    rows: typing.List[ResultRow] = []
    for attachment_id in candidates:
        document = index.documents[attachment_id]
        if classes is not None and document.attachment_class not in classes:
            continue
        lexical = lexical_score(index, terms, attachment_id)
        if lexical <= 0:
            continue
        ar = index.ar_values[attachment_id]
        ar_norm = ar / index.max_ar if index.max_ar > 0 else 0.0
        final = lexical * (1 + ar_weight * ar_norm)
        rows.append(ResultRow(attachment_id, lexical, final, ar, document))

    rows.sort(key=lambda row: (-row.final_score, row.attachment_id))
    return QueryResult(terms, rows[:k])


def precision_at_k(
    result: QueryResult,
    relevant_ids: typing.AbstractSet[graph_model.AttachmentId],
    k: int,
) -> float:
    """
    Fraction of the top k results that are relevant.  Missing
    results count as misses.
    """
    if k < 1:
        raise SearchError(f"k must be at least 1, got {k}")
    hits = sum(1 for attachment_id in result.ids()[:k] if attachment_id in relevant_ids)
    return hits / k


def format_table(result: QueryResult) -> str:
    """
    Aligned text table, one result per line.
    """
    if not result.rows:
        return "no results\n"
    lines = [
        f"{'#':>3}  {'final':>10}  {'lexical':>10}  {'ar':>10}  "
        + f"{'class':<12}  attachment"
    ]
    indent = " " * (3 + 2 + 10 + 2 + 10 + 2 + 10 + 2 + 12 + 2)
    for position, row in enumerate(result.rows, start=1):
        lines.append(
            f"{position:>3}  {row.final_score:>10.4f}  {row.lexical_score:>10.4f}  "
            + f"{row.ar:>10.4f}  {str(row.attachment_class):<12}  {row.attachment_id}"
        )
        if row.containing_page is not None:
            lines.append(f"{indent}on {row.containing_page}")
    return "\n".join(lines) + "\n"


def format_records(result: QueryResult) -> str:
    """
    One JSON object per result, one per line.
    """
    return "".join(
        json.dumps(row.to_json(), sort_keys=True, ensure_ascii=False) + "\n"
        for row in result.rows
    )
