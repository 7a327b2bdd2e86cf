# -*- coding: utf-8 -*-
"""
Ranks the sealed link graph, then hands each page's rank down to
the attachments it contains.

PageRank here is the un-normalized form

    PR(A) = (1 - d) + d * (PR(T1)/C(T1) + ... + PR(Tn)/C(Tn))

solved by synchronous (Jacobi) iteration from PR = 1 everywhere.
Pages with no outlinks contribute nothing to anybody.  At the fixed
point the ranks of a closed graph sum to the number of pages, not
to 1; use normalize_ranks() for the probability view.

An attachment's AttachRank is the PageRank of the page containing
it, or the highest such PageRank when several pages contain it.
"""

import math
import typing

import numpy as np

from boardcrawl import fancy_logger
from boardcrawl import graph_model


class RankError(Exception):
    """
    Raised when ranks and graph don't fit together, e.g. a page with
    attachments has no rank.
    """


class RankConfig:
    """
    Parameters of the PageRank iteration.
    """

    DEFAULT_D = 0.85
    DEFAULT_EPSILON = 1e-8
    DEFAULT_MAX_ITERATIONS = 200

    def __init__(
        self,
        d: float = DEFAULT_D,
        epsilon: float = DEFAULT_EPSILON,
        max_iterations: int = DEFAULT_MAX_ITERATIONS,
    ):
        if not 0 < d < 1:
            raise RankError(f"damping factor d must be in (0, 1), got {d}")
        if not epsilon > 0:
            raise RankError(f"epsilon must be positive, got {epsilon}")
        if max_iterations < 1:
            raise RankError(f"max_iterations must be at least 1, got {max_iterations}")
        self.d = d
        self.epsilon = epsilon
        self.max_iterations = max_iterations

    def as_dict(self) -> typing.Dict[str, typing.Union[float, int]]:
        return {
            "d": self.d,
            "epsilon": self.epsilon,
            "max_iterations": self.max_iterations,
        }

    @classmethod
    def from_dict(cls, data: typing.Mapping[str, typing.Any]) -> "RankConfig":
        return cls(
            d=float(data.get("d", cls.DEFAULT_D)),
            epsilon=float(data.get("epsilon", cls.DEFAULT_EPSILON)),
            max_iterations=int(data.get("max_iterations", cls.DEFAULT_MAX_ITERATIONS)),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RankConfig):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __repr__(self) -> str:
        return (
            f"RankConfig(d={self.d}, epsilon={self.epsilon}, "
            + f"max_iterations={self.max_iterations})"
        )


class RankVector:
    """
    PageRank per page, plus how the iteration ended.  `converged` is
    False when max_iterations ran out before the residual dropped
    below epsilon.
    """

    def __init__(
        self,
        values: typing.Dict[graph_model.PageId, float],
        iterations_used: int,
        final_residual: float,
        converged: bool,
    ):
        self._values = values
        self._iterations_used = iterations_used
        self._final_residual = final_residual
        self._converged = converged

    @property
    def values(self) -> typing.Mapping[graph_model.PageId, float]:
        return self._values

    @property
    def iterations_used(self) -> int:
        return self._iterations_used

    @property
    def final_residual(self) -> float:
        return self._final_residual

    @property
    def converged(self) -> bool:
        return self._converged

    def __getitem__(self, page_id: graph_model.PageId) -> float:
        return self._values[page_id]

    def __contains__(self, page_id: object) -> bool:
        return page_id in self._values

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return (
            f"RankVector(pages={len(self._values)}, "
            + f"iterations={self._iterations_used}, "
            + f"residual={self._final_residual:.3g}, converged={self._converged})"
        )


class AttachRankEntry:
    __slots__ = ("ar", "containing_pages")

    def __init__(
        self,
        ar: float,
        containing_pages: typing.Tuple[graph_model.PageId, ...],
    ):
        self.ar = ar
        self.containing_pages = containing_pages

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttachRankEntry):
            return NotImplemented
        return self.ar == other.ar and self.containing_pages == other.containing_pages

    def __repr__(self) -> str:
        return f"AttachRankEntry({self.ar!r}, {len(self.containing_pages)} page(s))"


class AttachRankTable:
    """
    AttachRank per attachment, with the pages containing it in
    PageId order.
    """

    def __init__(self, entries: typing.Dict[graph_model.AttachmentId, AttachRankEntry]):
        self._entries = entries

    @property
    def entries(self) -> typing.Mapping[graph_model.AttachmentId, AttachRankEntry]:
        return self._entries

    def ar(self, attachment_id: graph_model.AttachmentId) -> float:
        return self._entries[attachment_id].ar

    def __getitem__(self, attachment_id: graph_model.AttachmentId) -> AttachRankEntry:
        return self._entries[attachment_id]

    def __contains__(self, attachment_id: object) -> bool:
        return attachment_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> typing.Iterator[graph_model.AttachmentId]:
        return iter(sorted(self._entries))


def _edge_arrays(
    graph: graph_model.LinkGraph,
    index: typing.Dict[graph_model.PageId, int],
) -> typing.Tuple[np.ndarray, np.ndarray]:
    sources: typing.List[int] = []
    targets: typing.List[int] = []
    for page_id in sorted(graph.edges):
        src = index[page_id]
        for target in graph.edges[page_id]:
            if target not in index:
                raise RankError(f"Edge {page_id} -> {target} leaves the graph")
            sources.append(src)
            targets.append(index[target])
    return (
        np.array(sources, dtype=np.intp),
        np.array(targets, dtype=np.intp),
    )


def compute_pagerank(
    graph: graph_model.LinkGraph,
    config: typing.Optional[RankConfig] = None,
) -> RankVector:
    """
    Iterates PR_{k+1}(A) = (1 - d) + d * sum(PR_k(T) / C(T) for T -> A)
    from PR_0 = 1 until the L1 change between sweeps is below epsilon,
    or max_iterations sweeps have run.
    """
    if config is None:
        config = RankConfig()

    nodes = sorted(graph.nodes)
    if not nodes:
        return RankVector({}, iterations_used=0, final_residual=0.0, converged=True)

    index = {page_id: i for i, page_id in enumerate(nodes)}
    sources, targets = _edge_arrays(graph, index)
    size = len(nodes)
    out_degree = np.bincount(sources, minlength=size).astype(np.float64)
    # every source of an edge has out_degree >= 1
    shares = np.zeros(len(sources), dtype=np.float64)

    ranks = np.ones(size, dtype=np.float64)
    residual = math.inf
    iterations = 0
    converged = False
    while iterations < config.max_iterations:
        iterations += 1
        if len(sources):
            np.divide(ranks[sources], out_degree[sources], out=shares)
        incoming = np.bincount(targets, weights=shares, minlength=size)
        updated = (1.0 - config.d) + config.d * incoming
        residual = float(np.abs(updated - ranks).sum())
        ranks = updated
        if residual < config.epsilon:
            converged = True
            break

    if not converged:
        fancy_logger.get().warning(
            "PageRank did not converge after %d iterations (residual %.3g)",
            iterations,
            residual,
        )
    else:
        fancy_logger.get().debug(
            "PageRank converged after %d iterations (residual %.3g)",
            iterations,
            residual,
        )

    values = {page_id: float(ranks[i]) for i, page_id in enumerate(nodes)}
    return RankVector(
        values,
        iterations_used=iterations,
        final_residual=residual,
        converged=converged,
    )


def compute_attachrank(
    graph: graph_model.LinkGraph,
    ranks: RankVector,
) -> AttachRankTable:
    """
    Gives every contained attachment the PageRank of its containing
    page, or the maximum over its containing pages.
    """
    containing: typing.Dict[graph_model.AttachmentId, typing.List[graph_model.PageId]]
    containing = {}
    for page_id in sorted(graph.containment):
        attachments = graph.containment[page_id]
        if attachments and page_id not in ranks:
            raise RankError(f"Page {page_id} contains attachments but has no rank")
        for attachment_id in attachments:
            containing.setdefault(attachment_id, []).append(page_id)

    entries: typing.Dict[graph_model.AttachmentId, AttachRankEntry] = {}
    for attachment_id, pages in containing.items():
        pages_sorted = tuple(sorted(set(pages)))
        # max() returns one of the page values itself, never a recomputed one
        best = max(ranks[page_id] for page_id in pages_sorted)
        entries[attachment_id] = AttachRankEntry(best, pages_sorted)
    return AttachRankTable(entries)


def normalize_ranks(ranks: RankVector) -> typing.Dict[graph_model.PageId, float]:
    """
    Scales the ranks to a probability distribution over the pages.
    """
    if not len(ranks):
        raise RankError("Cannot normalize an empty rank vector")
    total = math.fsum(ranks.values.values())
    if total <= 0:
        raise RankError(f"Rank total is {total}, cannot normalize")
    return {page_id: value / total for page_id, value in ranks.values.items()}
