"""Literal similarity join over cluster families.

Two clusters are ED-joined when a member of one is within ``epsilon_t`` of a
member of the other, or within ``epsilon_t - d`` of a frontier concept
``(r, d)`` of the other. Candidates come from q-gram count filtering and are
confirmed with the true edit distance before any merge.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .cluster import ClusterRegistry, ClusterSet
from .errors import ParameterError
from .qgram_index import InvertedIndex, fold
from .text import DEFAULT_Q, edit_distance, probe_threshold, within_distance


@dataclass
class JoinedPair:
    """One verified match that caused (or would cause) a merge."""

    left: str
    right: str
    kind: str  # "member", "frontier"
    distance: int
    budget: int
    target: str = ""  # smallest member of the matched cluster


@dataclass
class EDJoinResult:
    merged: list[ClusterSet]
    pairs: list[JoinedPair] = field(default_factory=list)


def member_index(clusters: Iterable[ClusterSet], q: int) -> InvertedIndex:
    index = InvertedIndex(q)
    for c in clusters:
        for m in c.members:
            index.add(m)
    return index


def frontier_index(clusters: Iterable[ClusterSet], q: int) -> tuple[InvertedIndex, dict[str, list[tuple[int, int]]]]:
    """Index over frontier concept names, plus concept -> [(cluster id, d)]."""
    index = InvertedIndex(q)
    holders: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for c in clusters:
        for concept, d in c.frontier.items():
            index.add(concept)
            holders[concept].append((c.id, d))
    return index, holders


def ed_merge(
    registry: ClusterRegistry,
    probe: str,
    index: InvertedIndex,
    epsilon_t: int,
    budget_of=None,
    skip=None,
    merge: bool = True,
) -> list[JoinedPair]:
    """Verify the count-filter survivors of ``probe`` and merge their clusters.

    ``budget_of(ref)`` gives ``(budget, cluster_id)`` pairs for an indexed
    frontier concept (budget ``epsilon_t - d`` per holding cluster). Without
    it the indexed strings are members with budget ``epsilon_t``. Strings for
    which ``skip(ref)`` is true are ignored. With ``merge=False`` the
    verified pairs are only reported.
    """
    key = fold(probe)
    q = index.q
    result = index.probe(probe, epsilon_t)
    if result.fallback:
        survivors = index.length_scan(probe, epsilon_t)
    else:
        # the indexed side bounds the same shared count; keep v only when
        # count[v] >= |v| - q + 1 - epsilon_t * q as well
        survivors = [ref for ref, n in result.candidates
                     if n >= probe_threshold(len(index.keys[ref]), q, epsilon_t)]

    pairs: list[JoinedPair] = []
    for ref in survivors:
        if skip is not None and skip(ref):
            continue
        other = index.keys[ref]
        if budget_of is None:
            targets = [(epsilon_t, None)]
        else:
            targets = budget_of(ref)
        for budget, cid in targets:
            if not within_distance(key, other, budget):
                continue
            here = registry.locate(probe)
            there = registry.locate(ref) if cid is None else registry.clusters[cid]
            pairs.append(JoinedPair(probe, ref, "member" if cid is None else "frontier",
                                    edit_distance(key, other), budget, min(there.members)))
            if merge and here.id != there.id:
                registry.pair_join(here, there)
    return pairs


def ed_join(
    registry: ClusterRegistry,
    left: Iterable[ClusterSet],
    right: Iterable[ClusterSet],
    epsilon_t: int = 1,
    q: int = DEFAULT_Q,
    member_only: bool = False,
    merge: bool = True,
) -> EDJoinResult:
    """Merge clusters of ``left`` with literally similar clusters of ``right``.

    Passing the same family twice performs a self-join. Both families must
    live in ``registry``; merges retire the joined clusters there.
    """
    if epsilon_t < 0:
        raise ParameterError(f"epsilon_t must be >= 0, got {epsilon_t}")
    left = list(left)
    right = list(right)
    if not left or not right:
        return EDJoinResult(registry.live())

    left_ids = {c.id for c in left}
    right_ids = {c.id for c in right}
    x_l = member_index(left, q)
    x_r = member_index(right, q)
    left_members = sorted(x_l.keys)
    right_members = sorted(x_r.keys)
    pairs: list[JoinedPair] = []

    # member x member
    for m in left_members:
        pairs.extend(ed_merge(registry, m, x_r, epsilon_t, skip=lambda ref, m=m: ref == m, merge=merge))

    if not member_only:
        # frontier budgets are captured before merging rewrites cluster ids
        z_r, holders_r = frontier_index(right, q)
        z_l, holders_l = frontier_index(left, q)
        pairs.extend(_frontier_pass(registry, left_members, z_r, holders_r, epsilon_t, merge))
        if left_ids != right_ids:
            pairs.extend(_frontier_pass(registry, right_members, z_l, holders_l, epsilon_t, merge))

    return EDJoinResult(registry.live(), pairs)


def _frontier_pass(
    registry: ClusterRegistry,
    probes: list[str],
    index: InvertedIndex,
    holders: dict[str, list[tuple[int, int]]],
    epsilon_t: int,
    merge: bool = True,
) -> list[JoinedPair]:
    # holder ids go stale as merges happen; track them through a member
    anchor_member = {}
    for concept, hs in holders.items():
        for cid, _ in hs:
            if cid in registry.clusters:
                anchor_member[cid] = min(registry.clusters[cid].members)
    pairs: list[JoinedPair] = []
    for m in probes:
        def budgets(ref: str) -> list[tuple[int, int]]:
            out = []
            for cid, d in holders[ref]:
                member = anchor_member.get(cid)
                if member is None:
                    continue
                out.append((epsilon_t - d, registry.locate(member).id))
            return out
        pairs.extend(ed_merge(registry, m, index, epsilon_t, budget_of=budgets, merge=merge))
    return pairs
