"""Knowledge-graph similarity join driven by path-set expansion.

Every anchored member attribute starts paths at its concept. Path sets group
paths by end concept; for each (start, end) only the shortest length is kept
and lengths beyond ``gamma`` are dropped. Clusters merge when a path from one
cluster's member ends on another cluster's member concept, or on a frontier
entry ``(r, d)`` of another cluster with ``len + d <= gamma``.
"""
from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .cluster import ClusterRegistry, ClusterSet
from .errors import ParameterError
from .kb import KnowledgeGraph, NeighborTable, decompose_threshold
from .qgram_index import InvertedIndex, fold
from .text import DEFAULT_Q, edit_distance

__all__ = [
    "ConceptMatcher",
    "PathFrontier",
    "PathSet",
    "SemanticJoinResult",
    "decompose_threshold",
    "expand",
    "expand_paths",
    "expansion_schedule",
    "semantic_join",
]

DEFAULT_FRONTIER_CAP = 64


@dataclass
class PathSet:
    end: str
    paths: dict[str, int] = field(default_factory=dict)


class PathFrontier:
    """All known shortest paths, grouped by end concept and by start.

    ``origin[start]`` is the concept a start attribute is anchored to; a path
    that walks back to it is never recorded.
    """

    def __init__(self, gamma: int) -> None:
        if gamma < 1:
            raise ParameterError(f"gamma must be >= 1, got {gamma}")
        self.gamma = gamma
        self.by_end: dict[str, dict[str, int]] = {}
        self.by_start: dict[str, dict[str, int]] = {}
        self.origin: dict[str, str] = {}

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_end.values())

    def __contains__(self, end: object) -> bool:
        return end in self.by_end

    def seed(self, start: str, concept: str) -> None:
        self.origin[start] = concept
        self.by_start.setdefault(start, {})

    def offer(self, start: str, end: str, length: int) -> bool:
        """Record a path; True when it is new or shorter than the known one."""
        if length > self.gamma or end == self.origin.get(start):
            return False
        ends = self.by_start.setdefault(start, {})
        if ends.get(end, length + 1) <= length:
            return False
        ends[end] = length
        self.by_end.setdefault(end, {})[start] = length
        return True

    def path_set(self, end: str) -> PathSet:
        return PathSet(end, dict(self.by_end.get(end, {})))

    def distances(self, start: str) -> dict[str, int]:
        return dict(self.by_start.get(start, {}))

    def entries(self) -> list[tuple[str, str, int]]:
        return [(s, e, n) for s, ends in self.by_start.items() for e, n in ends.items()]

    def copy(self) -> "PathFrontier":
        other = PathFrontier(self.gamma)
        other.origin = dict(self.origin)
        other.by_start = {s: dict(v) for s, v in self.by_start.items()}
        other.by_end = {e: dict(v) for e, v in self.by_end.items()}
        return other


def expand(
    frontier: PathFrontier,
    table: NeighborTable,
    sources: Iterable[tuple[str, str, int]] | None = None,
) -> set[tuple[str, str]]:
    """Extend paths by one ``table`` hop in place.

    ``sources`` defaults to every recorded path. Zero-length paths from the
    origins are included in the default so a composed hop can start there.
    Returns the (start, end) pairs that were added or shortened.
    """
    if sources is None:
        sources = [(s, c, 0) for s, c in frontier.origin.items()] + frontier.entries()
    else:
        sources = list(sources)
    changed: set[tuple[str, str]] = set()
    k = table.k
    for start, end, length in sources:
        if length + k > frontier.gamma:
            continue
        for nxt in table[end]:
            if frontier.offer(start, nxt, length + k):
                changed.add((start, nxt))
    return changed


def expansion_schedule(ks: Iterable[int], gamma: int) -> list[int]:
    """Hop sizes whose successive application reaches every distance <= gamma.

    Tables are applied smallest first while each one is at most one past the
    covered range; the largest usable one then repeats. With only ``H_1``
    this is ``gamma`` unit rounds.
    """
    available = sorted(set(ks))
    if 1 not in available:
        raise ParameterError("expansion needs the 1-hop table")
    schedule: list[int] = []
    covered = 0
    largest = 1
    for k in available:
        if covered >= gamma or k > covered + 1:
            break
        schedule.append(k)
        covered += k
        largest = k
    while covered < gamma:
        schedule.append(largest)
        covered += largest
    return schedule


def expand_paths(
    origins: Mapping[str, str],
    tables: Mapping[int, NeighborTable] | Sequence[NeighborTable],
    gamma: int,
) -> PathFrontier:
    """Path frontier from each ``start -> concept`` origin out to ``gamma`` hops.

    With only a 1-hop table this is the round-by-round expansion: each round
    extends only the paths created in the previous one. With larger tables
    the hops follow :func:`expansion_schedule`, each followed by min-dedup.
    """
    by_k = dict(tables) if isinstance(tables, Mapping) else {t.k: t for t in tables}
    frontier = PathFrontier(gamma)
    for start, concept in origins.items():
        frontier.seed(start, concept)
    if 1 not in by_k:
        raise ParameterError("expansion needs the 1-hop table")
    schedule = expansion_schedule(by_k, gamma)

    if set(schedule) == {1}:
        h1 = by_k[1]
        fresh = [(s, c, 0) for s, c in origins.items()]
        for _ in range(gamma):
            changed = expand(frontier, h1, fresh)
            fresh = [(s, e, frontier.by_start[s][e]) for s, e in changed]
            if not fresh:
                break
        return frontier

    for k in schedule:
        expand(frontier, by_k[k])
    return frontier


class ConceptMatcher:
    """Anchor attribute text to the literally nearest knowledge-base concept."""

    def __init__(self, graph: KnowledgeGraph, q: int = DEFAULT_Q) -> None:
        self.graph = graph
        self.index = InvertedIndex(q)
        self.exact: dict[str, list[str]] = defaultdict(list)
        for name in graph.concepts:
            self.index.add(name)
            self.exact[fold(name)].append(name)
        for names in self.exact.values():
            names.sort()

    def anchor(self, text: str, epsilon_t: int) -> tuple[str, int] | None:
        """Nearest concept within ``epsilon_t`` edits, ties broken by name."""
        if text in self.graph.concepts:
            return text, 0
        key = fold(text)
        if key in self.exact:
            return self.exact[key][0], 0
        best: tuple[int, str] | None = None
        for name in self.index.candidates(text, epsilon_t):
            d = edit_distance(key, self.index.keys[name])
            if d <= epsilon_t and (best is None or (d, name) < best):
                best = (d, name)
        return None if best is None else (best[1], best[0])


@dataclass
class SemanticMerge:
    start: str
    target: str
    kind: str  # "member" or "frontier"
    distance: int


@dataclass
class SemanticJoinResult:
    merged: list[ClusterSet]
    paths: PathFrontier
    skipped: list[str] = field(default_factory=list)
    merges: list[SemanticMerge] = field(default_factory=list)


def capped_neighbors(graph_degree, concept_neighbors: Iterable[str], cap: int) -> list[str]:
    """The ``cap`` highest-degree neighbors, ties by name."""
    return heapq.nsmallest(cap, concept_neighbors, key=lambda c: (-graph_degree(c), c))


def semantic_join(
    registry: ClusterRegistry,
    family: Iterable[ClusterSet],
    anchors: Mapping[str, str | None],
    gamma: int,
    tables: Mapping[int, NeighborTable] | Sequence[NeighborTable],
    targets: Iterable[ClusterSet] | None = None,
    frontier_cap: int | None = None,
    degree=None,
) -> SemanticJoinResult:
    """Merge semantically close clusters of ``family`` (and of ``targets``).

    Paths start at the anchored members of ``family``. They may end on
    members or frontier entries of ``family`` or ``targets``. Members whose
    anchor is ``None`` or missing are skipped and reported.

    The frontier of each expanded cluster absorbs its members' path ends at
    their minimal lengths plus the anchors at distance 0. With
    ``frontier_cap`` set, only the anchor and its ``frontier_cap``
    highest-degree 1-hop neighbors are kept (``degree`` gives node degrees).
    """
    if gamma < 1:
        raise ParameterError(f"gamma must be >= 1, got {gamma}")
    family = list(family)
    target_list = family if targets is None else family + [c for c in targets
                                                           if c.id not in {f.id for f in family}]

    origins: dict[str, str] = {}
    skipped: list[str] = []
    for c in family:
        for m in sorted(c.members):
            concept = anchors.get(m)
            if concept is None:
                skipped.append(m)
            else:
                origins[m] = concept
    frontier = expand_paths(origins, tables, gamma)

    # snapshot of what can be hit, keyed by a member so stale ids resolve
    member_at: dict[str, list[str]] = defaultdict(list)
    frontier_at: dict[str, list[tuple[str, int]]] = defaultdict(list)
    for c in target_list:
        rep = min(c.members)
        for m in c.members:
            concept = anchors.get(m)
            if concept is not None:
                member_at[concept].append(m)
        for concept, d in c.frontier.items():
            frontier_at[concept].append((rep, d))

    # grow frontiers before merging; pair_join keeps the minimum
    by_k = dict(tables) if isinstance(tables, Mapping) else {t.k: t for t in tables}
    for start, concept in origins.items():
        cluster = registry.locate(start)
        if frontier_cap is None:
            reached = frontier.by_start.get(start, {})
        else:
            nbrs = by_k[1][concept]
            deg = degree or (lambda c: len(by_k[1][c]))
            reached = {n: 1 for n in capped_neighbors(deg, nbrs, frontier_cap)}
        cluster.absorb_frontier({concept: 0})
        cluster.absorb_frontier(reached)

    merges: list[SemanticMerge] = []
    for start in sorted(origins):
        hops = {origins[start]: 0}
        hops.update(frontier.by_start.get(start, {}))
        for end in sorted(hops):
            length = hops[end]
            for m in member_at.get(end, ()):
                if m != start:
                    _merge(registry, start, m)
                    merges.append(SemanticMerge(start, m, "member", length))
            for rep, d in frontier_at.get(end, ()):
                if length + d <= gamma:
                    _merge(registry, start, rep)
                    merges.append(SemanticMerge(start, rep, "frontier", length + d))
    return SemanticJoinResult(registry.live(), frontier, skipped, merges)


def _merge(registry: ClusterRegistry, a: str, b: str) -> None:
    ca, cb = registry.locate(a), registry.locate(b)
    if ca.id != cb.id:
        registry.pair_join(ca, cb)
