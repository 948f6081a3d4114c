"""Cluster sets (member attributes plus a concept frontier) and their registry."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import NotFound

log = logging.getLogger(__name__)


@dataclass
class ClusterSet:
    """Members ``U`` and frontier ``S_U``: concept -> minimal distance to ``U``."""

    id: int
    members: set[str]
    frontier: dict[str, int] = field(default_factory=dict)

    def __repr__(self) -> str:
        return f"ClusterSet(id={self.id}, members={sorted(self.members)}, frontier={len(self.frontier)})"

    def key(self) -> tuple[str, ...]:
        return tuple(sorted(self.members))

    def absorb_frontier(self, entries: Mapping[str, int]) -> None:
        for concept, d in entries.items():
            if d < self.frontier.get(concept, d + 1):
                self.frontier[concept] = d

    def to_doc(self) -> dict:
        return {
            "attributes": sorted(self.members),
            "frontier": [{"concept": c, "distance": d} for c, d in sorted(self.frontier.items())],
        }


def merge_frontiers(a: Mapping[str, int], b: Mapping[str, int]) -> dict[str, int]:
    out = dict(a)
    for concept, d in b.items():
        if d < out.get(concept, d + 1):
            out[concept] = d
    return out


class ClusterRegistry:
    """Live clusters and the attribute -> owning cluster map.

    Before resolve the live clusters partition the registered attributes.
    Resolve may leave a bridging attribute in several clusters; ``locate``
    then returns the lowest-id holder.
    """

    def __init__(self) -> None:
        self.clusters: dict[int, ClusterSet] = {}
        self.holders: dict[str, set[int]] = {}
        self._next_id = 0
        self.self_joins = 0

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self) -> Iterator[ClusterSet]:
        return iter(self.live())

    def __contains__(self, attribute: object) -> bool:
        return attribute in self.holders

    def live(self) -> list[ClusterSet]:
        return sorted(self.clusters.values(), key=ClusterSet.key)

    def attributes(self) -> set[str]:
        return set(self.holders)

    def add(self, members: Iterable[str], frontier: Mapping[str, int] | None = None) -> ClusterSet:
        cluster = ClusterSet(self._next_id, set(members), dict(frontier or {}))
        if not cluster.members:
            raise ValueError("a cluster needs at least one member")
        self._next_id += 1
        self.clusters[cluster.id] = cluster
        for m in cluster.members:
            self.holders.setdefault(m, set()).add(cluster.id)
        return cluster

    def singleton(self, attribute: str) -> ClusterSet:
        return self.add([attribute])

    def retire(self, cluster: ClusterSet) -> None:
        del self.clusters[cluster.id]
        for m in cluster.members:
            ids = self.holders[m]
            ids.discard(cluster.id)
            if not ids:
                del self.holders[m]

    def locate(self, attribute: str) -> ClusterSet:
        ids = self.holders.get(attribute)
        if not ids:
            raise NotFound(attribute)
        return self.clusters[min(ids)]

    def pair_join(self, a: ClusterSet, b: ClusterSet) -> ClusterSet:
        """Retire ``a`` and ``b`` and register their union.

        Each frontier concept keeps the smaller of its two distances, which is
        the minimum over the merged members for the materialized frontier.
        """
        if a.id == b.id:
            self.self_joins += 1
            log.debug("pair_join of cluster %d with itself ignored", a.id)
            return a
        self.retire(a)
        self.retire(b)
        return self.add(a.members | b.members, merge_frontiers(a.frontier, b.frontier))

    def join_attributes(self, x: str, y: str) -> ClusterSet:
        return self.pair_join(self.locate(x), self.locate(y))

    def is_partition(self) -> bool:
        return all(len(ids) == 1 for ids in self.holders.values())

    def partition(self) -> set[frozenset[str]]:
        return {frozenset(c.members) for c in self.clusters.values()}
