# -*- coding: utf-8 -*-
"""
Generates synthetic bulletin boards to crawl, and serves them.

A generated board looks like a small institutional notice board: an
index page, notice pages hanging off it in a random tree, cross links
and "home" links, attachments linked from the notices, some of them
from more than one notice, plus a sprinkling of links a crawler must
throw away (mailto:, javascript:, other hosts).

Generation is a pure function of the FixtureSpec: the same spec
always writes the same bytes.  Next to the site, ground_truth.json
declares what a crawl of it must find.
"""

import asyncio
import datetime
import hashlib
import json
import math
import os
import posixpath
import random
import threading
import typing

import aiohttp.web
import ruamel.yaml as ryaml

from boardcrawl import classifier
from boardcrawl import fancy_logger
from boardcrawl import graph_model
from boardcrawl import scanner

AttachmentClass = graph_model.AttachmentClass

SITE_DIR = "site"
GROUND_TRUTH_FILENAME = "ground_truth.json"
INDEX_PAGE = "index.html"
GROUND_TRUTH_VERSION = 1

# base used to audit the generated tree; never fetched
AUDIT_BASE = "http://fixture.invalid/"
_EPOCH = datetime.datetime(1970, 1, 1, tzinfo=datetime.timezone.utc)

DEFAULT_CLASS_MIX: typing.Dict[AttachmentClass, float] = {
    AttachmentClass.DOCUMENT: 0.35,
    AttachmentClass.SPREADSHEET: 0.2,
    AttachmentClass.PRESENTATION: 0.1,
    AttachmentClass.TEXT: 0.15,
    AttachmentClass.ARCHIVE: 0.08,
    AttachmentClass.IMAGE: 0.1,
    AttachmentClass.OTHER: 0.02,
}

OTHER_SUFFIXES = ["bin", "dat"]

BOARD_WORDS = (
    "announcement meeting schedule budget committee department faculty "
    + "student course lecture room office deadline form report policy "
    + "holiday campus network service update review project research grant "
    + "application request minutes agenda staff training workshop council "
    + "election result list semester term section building maintenance "
    + "safety equipment purchase contract timetable transport parking "
    + "catalogue payroll survey"
).split()

# never used in ordinary pages, so a planted query only matches its
# own candidates
PLANTED_QUERY_TERMS = (
    "scholarship examination laboratory graduation seminar internship "
    + "registration dormitory library tuition conference admission"
).split()

PAGE_TEMPLATE = """<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>{title}</title>
</head>
<body>
<h1>{title}</h1>
<p>{body}</p>
<ul>
{links}
</ul>
</body>
</html>
"""


class FixtureError(Exception):
    """
    Raised when a fixture can't be generated or served, or fails its
    own audit.
    """


class RelevancePlan:
    """
    Plants queries with known answers.  For each query term, a
    listing page links `relevant_per_query + decoys_per_query`
    candidate notices, each carrying one attachment about the term.
    Relevant candidates also get `boost - 1` extra in-links from
    ordinary notices.
    """

    def __init__(
        self,
        queries: typing.Sequence[str],
        relevant_per_query: int = 5,
        decoys_per_query: int = 10,
        boost: int = 5,
    ):
        if not queries:
            raise FixtureError("A relevance plan needs at least one query")
        for term in queries:
            if term in BOARD_WORDS or len(term.split()) != 1:
                raise FixtureError(f"Unusable planted query term '{term}'")
        if len(set(queries)) != len(queries):
            raise FixtureError("Planted query terms must be distinct")
        if relevant_per_query < 1 or decoys_per_query < 0 or boost < 1:
            raise FixtureError(
                "relevant_per_query and boost must be at least 1, "
                + "decoys_per_query at least 0"
            )
        self.queries = [term.lower() for term in queries]
        self.relevant_per_query = relevant_per_query
        self.decoys_per_query = decoys_per_query
        self.boost = boost

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any]) -> "RelevancePlan":
        queries = data.get("queries", 10)
        if isinstance(queries, int):
            if not 0 < queries <= len(PLANTED_QUERY_TERMS):
                raise FixtureError(
                    f"queries must be between 1 and {len(PLANTED_QUERY_TERMS)}"
                )
            queries = PLANTED_QUERY_TERMS[:queries]
        return cls(
            queries=[str(term) for term in queries],
            relevant_per_query=int(data.get("relevant_per_query", 5)),
            decoys_per_query=int(data.get("decoys_per_query", 10)),
            boost=int(data.get("boost", 5)),
        )

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return {
            "queries": list(self.queries),
            "relevant_per_query": self.relevant_per_query,
            "decoys_per_query": self.decoys_per_query,
            "boost": self.boost,
        }


class FixtureSpec:
    """
    What to generate.  n_pages counts the index page; n_attachments
    counts distinct attachment files.  Pages and attachments planted
    by a relevance plan come on top of both.
    """

    def __init__(
        self,
        seed: int = 0,
        n_pages: int = 200,
        n_attachments: int = 500,
        link_density: float = 3.0,
        class_mix: typing.Optional[typing.Mapping[typing.Any, float]] = None,
        shared_fraction: float = 0.1,
        noise_links: bool = True,
        relevance_plan: typing.Optional[RelevancePlan] = None,
    ):
        if n_pages < 1:
            raise FixtureError(f"n_pages must be at least 1, got {n_pages}")
        if n_attachments < 0:
            raise FixtureError(
                f"n_attachments must be at least 0, got {n_attachments}"
            )
        if link_density < 0:
            raise FixtureError(
                f"link_density must be at least 0, got {link_density}"
            )
        if not 0 <= shared_fraction <= 1:
            raise FixtureError(
                f"shared_fraction must be in [0, 1], got {shared_fraction}"
            )

        mix: typing.Dict[AttachmentClass, float] = {}
        for name, weight in (class_mix or DEFAULT_CLASS_MIX).items():
            try:
                attachment_class = AttachmentClass(str(name).lower())
            except ValueError as err:
                raise FixtureError(f"Unknown attachment class '{name}'") from err
            if weight < 0:
                raise FixtureError(f"Negative weight for class {attachment_class}")
            mix[attachment_class] = float(weight)
        if not math.isclose(math.fsum(mix.values()), 1.0, abs_tol=1e-9):
            raise FixtureError("class_mix weights must sum to 1")

        self.seed = seed
        self.n_pages = n_pages
        self.n_attachments = n_attachments
        self.link_density = link_density
        self.class_mix = mix
        self.shared_fraction = shared_fraction
        self.noise_links = noise_links
        self.relevance_plan = relevance_plan

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any]) -> "FixtureSpec":
        plan = data.get("relevance_plan")
        try:
            return cls(
                seed=int(data.get("seed", 0)),
                n_pages=int(data.get("n_pages", 200)),
                n_attachments=int(data.get("n_attachments", 500)),
                link_density=float(data.get("link_density", 3.0)),
                class_mix=data.get("class_mix"),
                shared_fraction=float(data.get("shared_fraction", 0.1)),
                noise_links=bool(data.get("noise_links", True)),
                relevance_plan=RelevancePlan.from_dict(plan) if plan else None,
            )
        except (TypeError, ValueError) as err:
            raise FixtureError(f"Invalid fixture spec: {err}") from err

    @classmethod
    def from_file(cls, filename: str) -> "FixtureSpec":
        """
        Loads a spec from a YAML (or JSON) file.
        """
        try:
            with open(filename, "r", encoding="utf-8") as file:
                data = ryaml.YAML(typ="safe").load(file)
        except (OSError, ryaml.YAMLError) as err:
            raise FixtureError(f"Could not read fixture spec {filename}") from err
        if not isinstance(data, dict):
            raise FixtureError(f"Fixture spec {filename} must be a mapping")
        return cls.from_dict(data)

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return {
            "seed": self.seed,
            "n_pages": self.n_pages,
            "n_attachments": self.n_attachments,
            "link_density": self.link_density,
            "class_mix": {str(c): w for c, w in sorted(self.class_mix.items())},
            "shared_fraction": self.shared_fraction,
            "noise_links": self.noise_links,
            "relevance_plan": (
                self.relevance_plan.as_dict() if self.relevance_plan else None
            ),
        }


class DeclaredPage:
    """
    A generated page.  Paths are relative to the site root.
    """

    def __init__(
        self,
        path: str,
        title: str,
        body: str,
        outlinks: typing.Sequence[str],
        attachments: typing.Sequence[str],
    ):
        self.path = path
        self.title = title
        self.body = body
        self.outlinks = list(outlinks)
        self.attachments = list(attachments)

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "path": self.path,
            "title": self.title,
            "body": self.body,
            "outlinks": self.outlinks,
            "attachments": self.attachments,
        }


class DeclaredAttachment:
    """
    A generated attachment.  `path` may carry a query string; the
    file on disk is at the path without it.
    """

    def __init__(
        self,
        path: str,
        attachment_class: AttachmentClass,
        anchor_text: str,
        sha256: str,
        containing_pages: typing.Sequence[str],
    ):
        self.path = path
        self.attachment_class = attachment_class
        self.anchor_text = anchor_text
        self.sha256 = sha256
        self.containing_pages = list(containing_pages)

    @property
    def file_path(self) -> str:
        return self.path.split("?", 1)[0]

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "path": self.path,
            "class": str(self.attachment_class),
            "anchor_text": self.anchor_text,
            "sha256": self.sha256,
            "containing_pages": self.containing_pages,
        }


class PlantedQuery:
    def __init__(
        self,
        query: str,
        relevant: typing.Sequence[str],
        candidates: typing.Sequence[str],
    ):
        self.query = query
        self.relevant = list(relevant)
        self.candidates = list(candidates)

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "query": self.query,
            "relevant": self.relevant,
            "candidates": self.candidates,
        }


class GroundTruth:
    """
    Everything a generated board declares: its pages, its
    attachments, and the answers to its planted queries.
    """

    def __init__(
        self,
        spec: typing.Dict[str, typing.Any],
        pages: typing.List[DeclaredPage],
        attachments: typing.List[DeclaredAttachment],
        queries: typing.List[PlantedQuery],
    ):
        self.spec = spec
        self.pages = sorted(pages, key=lambda page: page.path)
        self.attachments = sorted(attachments, key=lambda a: a.path)
        self.queries = queries

    @property
    def page_count(self) -> int:
        return len(self.pages)

    @property
    def attachment_count(self) -> int:
        return len(self.attachments)

    def class_counts(self) -> typing.Dict[str, int]:
        counts: typing.Dict[str, int] = {}
        for attachment in self.attachments:
            key = str(attachment.attachment_class)
            counts[key] = counts.get(key, 0) + 1
        return counts

    @staticmethod
    def page_id(base_url: str, path: str) -> graph_model.PageId:
        return graph_model.PageId(base_url.rstrip("/") + "/" + path)

    @staticmethod
    def attachment_id(base_url: str, path: str) -> graph_model.AttachmentId:
        return graph_model.AttachmentId(base_url.rstrip("/") + "/" + path)

    def relevant_ids(
        self, base_url: str, query: PlantedQuery
    ) -> typing.Set[graph_model.AttachmentId]:
        return {self.attachment_id(base_url, path) for path in query.relevant}

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "version": GROUND_TRUTH_VERSION,
            "spec": self.spec,
            "pages": [page.to_json() for page in self.pages],
            "attachments": [a.to_json() for a in self.attachments],
            "queries": [query.to_json() for query in self.queries],
        }

    def save(self, filename: str) -> None:
        with open(filename, "w", encoding="utf-8", newline="\n") as file:
            json.dump(self.to_json(), file, indent=2, sort_keys=True)
            file.write("\n")

    @classmethod
    def load(cls, filename: str) -> "GroundTruth":
        try:
            with open(filename, "r", encoding="utf-8") as file:
                data = json.load(file)
            return cls(
                spec=data["spec"],
                pages=[
                    DeclaredPage(
                        p["path"],
                        p["title"],
                        p["body"],
                        p["outlinks"],
                        p["attachments"],
                    )
                    for p in data["pages"]
                ],
                attachments=[
                    DeclaredAttachment(
                        a["path"],
                        AttachmentClass(a["class"]),
                        a["anchor_text"],
                        a["sha256"],
                        a["containing_pages"],
                    )
                    for a in data["attachments"]
                ],
                queries=[
                    PlantedQuery(q["query"], q["relevant"], q["candidates"])
                    for q in data["queries"]
                ],
            )
        except (OSError, ValueError, KeyError, TypeError) as err:
            raise FixtureError(f"Could not read ground truth {filename}") from err


class _Link:
    __slots__ = ("target", "anchor", "is_page")

    def __init__(self, target: str, anchor: str, is_page: bool):
        self.target = target
        self.anchor = anchor
        self.is_page = is_page


class _PagePlan:
    def __init__(self, path: str, title: str, body: str):
        self.path = path
        self.title = title
        self.body = body
        self.links: typing.List[_Link] = []
        self.noise: typing.List[typing.Tuple[str, str]] = []

    def add_page_link(self, target: str, anchor: str) -> None:
        if target == self.path:
            return
        if any(link.is_page and link.target == target for link in self.links):
            return
        self.links.append(_Link(target, anchor, is_page=True))

    def add_attachment_link(self, target: str, anchor: str) -> None:
        if any(not link.is_page and link.target == target for link in self.links):
            return
        self.links.append(_Link(target, anchor, is_page=False))


class _BoardBuilder:
    """
    Plans a board in memory.  All randomness comes from one seeded
    generator, consumed in a fixed order.
    """

    def __init__(self, spec: FixtureSpec):
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.pages: typing.List[_PagePlan] = []
        self.attachments: typing.Dict[str, DeclaredAttachment] = {}
        self.payloads: typing.Dict[str, bytes] = {}
        self.queries: typing.List[PlantedQuery] = []
        self.file_counter = 0

    def _words(self, low: int, high: int) -> str:
        return " ".join(
            self.rng.choice(BOARD_WORDS) for _ in range(self.rng.randint(low, high))
        )

    def _payload(self, attachment_class: AttachmentClass) -> bytes:
        if attachment_class == AttachmentClass.TEXT:
            return (self._words(20, 120) + "\n").encode("utf-8")
        size = self.rng.randint(64, 4096)
        return self.rng.getrandbits(8 * size).to_bytes(size, "little")

    def _suffix(self, attachment_class: AttachmentClass) -> str:
        if attachment_class == AttachmentClass.OTHER:
            suffix = self.rng.choice(OTHER_SUFFIXES)
        else:
            suffix = self.rng.choice(
                classifier.DEFAULT_ATTACHMENT_SUFFIXES[attachment_class]
            )
        if self.rng.random() < 0.15:
            suffix = suffix.upper()
        return suffix

    def _new_attachment(
        self, attachment_class: AttachmentClass, anchor_text: str
    ) -> str:
        self.file_counter += 1
        path = f"files/file-{self.file_counter:04d}.{self._suffix(attachment_class)}"
        if self.rng.random() < 0.1:
            path += "?dl=1"
        payload = self._payload(attachment_class)
        self.payloads[path.split("?", 1)[0]] = payload
        self.attachments[path] = DeclaredAttachment(
            path=path,
            attachment_class=attachment_class,
            anchor_text=anchor_text,
            sha256=hashlib.sha256(payload).hexdigest(),
            containing_pages=[],
        )
        return path

    def _attach(self, page: _PagePlan, path: str, anchor_text: str) -> None:
        page.add_attachment_link(path, anchor_text)
        declared = self.attachments[path]
        if page.path not in declared.containing_pages:
            declared.containing_pages.append(page.path)

    def _plan_ordinary_pages(self) -> None:
        spec = self.spec
        self.pages.append(_PagePlan(INDEX_PAGE, "Bulletin board", self._words(8, 16)))
        for number in range(1, spec.n_pages):
            title = f"Notice {number:04d} {self._words(2, 4)}"
            path = f"notices/notice-{number:04d}.html"
            self.pages.append(_PagePlan(path, title, self._words(12, 40)))

        # random tree from the index, so every page is reachable
        for number in range(1, spec.n_pages):
            parent = self.pages[self.rng.randrange(number)]
            child = self.pages[number]
            parent.add_page_link(child.path, child.title)
            child.add_page_link(INDEX_PAGE, "Home")

        extra_links = max(
            0, round(spec.link_density * spec.n_pages) - (spec.n_pages - 1)
        )
        if spec.n_pages > 1:
            for _ in range(extra_links):
                source = self.rng.choice(self.pages)
                target = self.rng.choice(self.pages)
                source.add_page_link(target.path, target.title)

    def _plan_ordinary_attachments(self) -> None:
        spec = self.spec
        holders = self.pages[1:] or self.pages
        classes = sorted(spec.class_mix)
        weights = [spec.class_mix[c] for c in classes]
        for _ in range(spec.n_attachments):
            attachment_class = self.rng.choices(classes, weights)[0]
            anchor_text = f"{self._words(1, 3)} ({attachment_class})"
            path = self._new_attachment(attachment_class, anchor_text)
            self._attach(self.rng.choice(holders), path, anchor_text)
            if len(holders) > 1 and self.rng.random() < spec.shared_fraction:
                self._attach(self.rng.choice(holders), path, anchor_text)

    def _plan_relevance(self, plan: RelevancePlan) -> None:
        index = self.pages[0]
        boosters = self.pages[1:] or self.pages[:1]
        per_query = plan.relevant_per_query + plan.decoys_per_query
        for query_number, term in enumerate(plan.queries):
            listing = _PagePlan(
                f"lists/topic-{query_number:02d}.html",
                f"{term.capitalize()} notices",
                f"All notices about {term}.",
            )
            self.pages.append(listing)
            index.add_page_link(listing.path, listing.title)

            relevant_slots = set(
                self.rng.sample(range(per_query), plan.relevant_per_query)
            )
            relevant: typing.List[str] = []
            candidates: typing.List[str] = []
            for slot in range(per_query):
                filler = self._words(8, 8)
                candidate = _PagePlan(
                    f"notices/planted-{query_number:02d}-{slot:02d}.html",
                    f"{term.capitalize()} notice {query_number:02d}-{slot:02d}",
                    f"Arrangements for {term}: {filler}.",
                )
                self.pages.append(candidate)
                listing.add_page_link(candidate.path, candidate.title)
                candidate.add_page_link(INDEX_PAGE, "Home")

                anchor_text = f"{term} attachment"
                path = self._new_attachment(AttachmentClass.DOCUMENT, anchor_text)
                self._attach(candidate, path, anchor_text)
                candidates.append(path)

                if slot in relevant_slots:
                    relevant.append(path)
                    count = min(plan.boost - 1, len(boosters))
                    for booster in self.rng.sample(boosters, count):
                        booster.add_page_link(candidate.path, "related notice")

            self.queries.append(PlantedQuery(term, relevant, candidates))

    def _plan_noise(self) -> None:
        self.pages[0].noise.append(("http://elsewhere.example/board/", "Other board"))
        for page in self.pages[1:]:
            roll = self.rng.random()
            if roll < 0.15:
                page.noise.append(("mailto:office@board.example", "Contact the office"))
            elif roll < 0.25:
                page.noise.append(("javascript:void(0)", "Print"))
            elif roll < 0.35:
                page.noise.append(("#top", "Back to top"))

    def build(self) -> None:
        self._plan_ordinary_pages()
        self._plan_ordinary_attachments()
        if self.spec.relevance_plan is not None:
            self._plan_relevance(self.spec.relevance_plan)
        if self.spec.noise_links:
            self._plan_noise()

    def _href(self, from_path: str, target: str) -> str:
        # mostly relative, sometimes root-absolute
        if self.rng.random() < 0.25:
            return "/" + target
        start = posixpath.dirname(from_path) or "."
        return posixpath.relpath(target, start)

    def render(self, page: _PagePlan) -> str:
        items = []
        for link in page.links:
            href = self._href(page.path, link.target)
            tag = "A HREF" if self.rng.random() < 0.1 else "a href"
            closing = "A" if tag == "A HREF" else "a"
            items.append(f'<li><{tag}="{href}">{link.anchor}</{closing}></li>')
        for href, anchor in page.noise:
            items.append(f'<li><a href="{href}">{anchor}</a></li>')
        return PAGE_TEMPLATE.format(
            title=page.title,
            body=page.body,
            links="\n".join(items),
        )

    def ground_truth(self) -> GroundTruth:
        pages = [
            DeclaredPage(
                path=page.path,
                title=page.title,
                body=page.body,
                outlinks=[link.target for link in page.links if link.is_page],
                attachments=[link.target for link in page.links if not link.is_page],
            )
            for page in self.pages
        ]
        for attachment in self.attachments.values():
            attachment.containing_pages.sort()
        return GroundTruth(
            spec=self.spec.as_dict(),
            pages=pages,
            attachments=list(self.attachments.values()),
            queries=self.queries,
        )


def _write_file(path: str, data: bytes) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "wb") as file:
        file.write(data)


def audit_site(site_dir: str, truth: GroundTruth) -> typing.List[str]:
    """
    Re-parses the generated tree the way the crawler would and
    compares it with the ground truth.  Returns the mismatches.
    """
    problems: typing.List[str] = []
    table = classifier.SuffixTable.default()
    declared_pages = {page.path: page for page in truth.pages}
    declared_attachments = {a.path: a for a in truth.attachments}
    prefix = AUDIT_BASE

    def relative(url: str) -> typing.Optional[str]:
        return url[len(prefix) :] if url.startswith(prefix) else None

    contained: typing.Dict[str, typing.Set[str]] = {}
    for page in truth.pages:
        filename = os.path.join(site_dir, *page.path.split("/"))
        try:
            with open(filename, "rb") as file:
                html = file.read()
        except OSError:
            problems.append(f"{page.path}: missing")
            continue

        page_id = GroundTruth.page_id(prefix, page.path)
        outlinks: typing.List[graph_model.PageId] = []
        attachments: typing.List[graph_model.AttachmentId] = []
        for link in scanner.extract_links(html, page_id):
            decision = classifier.classify_link(
                scanner.normalize_url(page_id, link.href), table
            )
            if isinstance(decision, classifier.Page):
                if relative(decision.page_id.value) is not None:
                    outlinks.append(decision.page_id)
            elif isinstance(decision, classifier.Attachment):
                attachments.append(decision.attachment_id)
                target = relative(decision.attachment_id.value)
                declared = declared_attachments.get(target or "")
                if declared is None:
                    problems.append(f"{page.path}: undeclared attachment {target}")
                elif declared.attachment_class != decision.attachment_class:
                    problems.append(
                        f"{page.path}: {target} classifies as "
                        + f"{decision.attachment_class}, declared "
                        + f"{declared.attachment_class}"
                    )
                contained.setdefault(target or "", set()).add(page.path)

        record = graph_model.PageRecord(
            page_id, "", "", _EPOCH, 200, outlinks=outlinks, attachments=attachments
        )
        found_outlinks = [relative(link.value) for link in record.outlinks]
        if found_outlinks != page.outlinks:
            problems.append(f"{page.path}: outlinks differ from declared")
        found_attachments = [relative(a.value) for a in record.attachments]
        if found_attachments != page.attachments:
            problems.append(f"{page.path}: attachments differ from declared")

        title, body_text = scanner.extract_page_text(html)
        if title != page.title:
            problems.append(f"{page.path}: title is '{title}'")
        if page.body not in body_text:
            problems.append(f"{page.path}: body text not found")

    for path, declared in declared_attachments.items():
        filename = os.path.join(site_dir, *declared.file_path.split("/"))
        try:
            with open(filename, "rb") as file:
                digest = hashlib.sha256(file.read()).hexdigest()
        except OSError:
            problems.append(f"{path}: missing")
            continue
        if digest != declared.sha256:
            problems.append(f"{path}: digest mismatch")
        if sorted(contained.get(path, ())) != declared.containing_pages:
            problems.append(f"{path}: containing pages differ from declared")

    reached = {INDEX_PAGE}
    frontier = [INDEX_PAGE]
    while frontier:
        for target in declared_pages[frontier.pop()].outlinks:
            if target not in reached:
                reached.add(target)
                frontier.append(target)
    for path in sorted(set(declared_pages) - reached):
        problems.append(f"{path}: not reachable from {INDEX_PAGE}")

    return problems


def generate_site(spec: FixtureSpec, out_dir: str) -> GroundTruth:
    """
    Writes the board to out_dir/site/ and its ground truth to
    out_dir/ground_truth.json.  Same spec, same bytes.

    Raises FixtureError if out_dir can't be written, or if the tree
    doesn't match its own ground truth.
    """
    builder = _BoardBuilder(spec)
    builder.build()
    truth = builder.ground_truth()

    site_dir = os.path.join(out_dir, SITE_DIR)
    try:
        for page in builder.pages:
            html = builder.render(page)
            _write_file(
                os.path.join(site_dir, *page.path.split("/")), html.encode("utf-8")
            )
        for file_path, payload in sorted(builder.payloads.items()):
            _write_file(os.path.join(site_dir, *file_path.split("/")), payload)
        truth.save(os.path.join(out_dir, GROUND_TRUTH_FILENAME))
    except OSError as err:
        raise FixtureError(f"Could not write fixture to {out_dir}") from err

    problems = audit_site(site_dir, truth)
    if problems:
        for problem in problems[:20]:
            fancy_logger.get().error("Fixture audit: %s", problem)
        raise FixtureError(
            f"Generated fixture failed its audit ({len(problems)} problems)"
        )

    fancy_logger.get().info(
        "Generated board with %d page(s) and %d attachment(s) in %s",
        truth.page_count,
        truth.attachment_count,
        site_dir,
    )
    return truth


def make_app(directory: str) -> aiohttp.web.Application:
    app = aiohttp.web.Application()
    app.router.add_static("/", directory, show_index=False, follow_symlinks=False)
    return app


class FixtureServer:
    """
    Purpose: serves a directory of static files over HTTP, from a
    background thread, for tests and for `fixture serve`.

    port 0 picks a free port; read it back from `port` after start().
    """

    def __init__(self, directory: str, port: int = 0, host: str = "127.0.0.1"):
        if not os.path.isdir(directory):
            raise FixtureError(f"Not a directory: {directory}")
        self.directory = directory
        self.host = host
        self.port = port
        self._loop: typing.Optional[asyncio.AbstractEventLoop] = None
        self._thread: typing.Optional[threading.Thread] = None
        self._ready = threading.Event()
        self._startup_error: typing.Optional[BaseException] = None

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}/"

    def url(self, path: str) -> str:
        return self.base_url + path.lstrip("/")

    def _run(self) -> None:
        loop = asyncio.new_event_loop()
        asyncio.set_event_loop(loop)
        self._loop = loop
        runner = aiohttp.web.AppRunner(make_app(self.directory), access_log=None)
        try:
            loop.run_until_complete(runner.setup())
            site = aiohttp.web.TCPSite(runner, self.host, self.port)
            loop.run_until_complete(site.start())
            self.port = runner.addresses[0][1]
        except OSError as err:
            self._startup_error = err
            loop.run_until_complete(runner.cleanup())
            loop.close()
            self._ready.set()
            return

        self._ready.set()
        try:
            loop.run_forever()
        finally:
            loop.run_until_complete(runner.cleanup())
            loop.close()

    def start(self) -> "FixtureServer":
        if self._thread is not None and self._thread.is_alive():
            return self
        self._ready.clear()
        self._thread = threading.Thread(
            target=self._run, name="fixture-server", daemon=True
        )
        self._thread.start()
        self._ready.wait()
        if self._startup_error is not None:
            self._thread.join()
            raise FixtureError(
                f"Could not serve on {self.host}:{self.port}: {self._startup_error}"
            ) from self._startup_error
        fancy_logger.get().info("Serving %s at %s", self.directory, self.base_url)
        return self

    def stop(self) -> None:
        if self._loop is None or self._thread is None:
            return
        if self._thread.is_alive():
            self._loop.call_soon_threadsafe(self._loop.stop)
            self._thread.join()
        self._thread = None
        self._loop = None

    def __enter__(self) -> "FixtureServer":
        return self.start()

    def __exit__(self, *_err) -> None:
        self.stop()


def site_directory(directory: str) -> str:
    """
    The site/ subdirectory of a generated fixture, or directory itself.
    """
    site_dir = os.path.join(directory, SITE_DIR)
    if os.path.isdir(site_dir):
        return site_dir
    return directory


def serve(directory: str, port: int = 0, host: str = "127.0.0.1") -> FixtureServer:
    """
    Starts serving directory and returns the running server.  Call
    stop() on it, or use it as a context manager.
    """
    return FixtureServer(directory, port=port, host=host).start()
