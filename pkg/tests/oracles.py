"""Independent reference implementations the package is checked against.

Nothing here imports the package's algorithms.
"""
from __future__ import annotations

from collections import deque


def dp_edit_distance(a: str, b: str) -> int:
    """Textbook quadratic Levenshtein DP."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return prev[-1]


def bfs_ball(adj: dict, source, radius: int) -> dict:
    """Shortest hop counts from ``source`` up to ``radius``, source excluded."""
    seen = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if seen[u] == radius:
            continue
        for v in adj.get(u, ()):
            if v not in seen:
                seen[v] = seen[u] + 1
                queue.append(v)
    del seen[source]
    return seen


def exact_ring(adj: dict, source, k: int) -> set:
    return {v for v, d in bfs_ball(adj, source, k).items() if d == k}


class UnionFind:
    def __init__(self, items=()):
        self.parent = {x: x for x in items}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def groups(self) -> set:
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), set()).add(x)
        return {frozenset(g) for g in out.values()}


def undirected(edges) -> dict:
    adj: dict = {}
    for a, b in edges:
        if a == b:
            continue
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj
