"""Knowledge-base storage: "is a" edge ingest, the concept graph, and
bucket-hashed neighbor tables for power-of-two hop counts.

Edges are stored directed as ingested but every traversal treats them as
undirected, so two siblings under one parent are two hops apart.

Neighbor table file layout (little-endian, format version 1)::

    header        "<4sHHIQIIQQ"  magic b"SJNT", version, flags (0), k, seed,
                                 bucket_length, bucket_count, entry_count,
                                 directory_pos
    bucket table  bucket_count x "<QQQ"  base_offset, file_pos, byte_len
    bucket        "<II" n_entries, n_slots
                  n_slots x "<III"  in-bucket slot, byte offset of the chain
                                    (relative to bucket start), chain length
                  entries, slot order then name order:
                      "<H" name_len, name, "<I" n_neighbors,
                      n_neighbors x ("<H" len, name)
    directory     "<Q" n, then n x ("<H" len, name, "<I" bucket_id),
                  sorted by UTF-8 bytes

``base_offset`` is the logical offset used by :func:`bucket_hash`
(``bucket_id * bucket_length``); ``file_pos`` is the byte position.
Names sharing an in-bucket slot are chained in the bucket's entry region.
"""
from __future__ import annotations

import bisect
import io
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
from scipy.sparse import csr_matrix, identity

from .errors import NotFound, ParameterError, StateCorruption

DEFAULT_SEED = 13
DEFAULT_BUCKET_LENGTH = 10_000
DEFAULT_BUCKET_CAPACITY = 4096

MAGIC = b"SJNT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIQIIQQ")
_BUCKET_REF = struct.Struct("<QQQ")
_SLOT = struct.Struct("<III")


@dataclass(frozen=True)
class Concept:
    id: str
    name: str
    type_tag: str


@dataclass
class Reject:
    line_no: int
    reason: str
    line: str


class KnowledgeGraph:
    """Concepts keyed by name with an undirected adjacency view."""

    def __init__(self) -> None:
        self.concepts: dict[str, Concept] = {}
        self.adjacency: dict[str, set[str]] = {}
        self.edges: set[tuple[str, str]] = set()

    def __len__(self) -> int:
        return len(self.concepts)

    def __contains__(self, name: object) -> bool:
        return name in self.concepts

    def __repr__(self) -> str:
        return f"KnowledgeGraph({len(self.concepts)} concepts, {len(self.edges)} edges)"

    def add_concept(self, concept: Concept) -> None:
        if concept.name not in self.concepts:
            self.concepts[concept.name] = concept
            self.adjacency[concept.name] = set()

    def add_edge(self, sub: Concept, sup: Concept) -> bool:
        """Add ``sub`` "is a" ``sup``. Returns False for self-loops and duplicates."""
        if sub.name == sup.name or (sub.name, sup.name) in self.edges:
            return False
        self.add_concept(sub)
        self.add_concept(sup)
        self.edges.add((sub.name, sup.name))
        self.adjacency[sub.name].add(sup.name)
        self.adjacency[sup.name].add(sub.name)
        return True

    def neighbors(self, name: str) -> set[str]:
        return self.adjacency.get(name, set())

    def degree(self, name: str) -> int:
        return len(self.adjacency.get(name, ()))

    def ball(self, source: str, radius: int) -> dict[str, int]:
        """Shortest undirected distance to every concept within ``radius``.

        The source itself is not included.
        """
        if source not in self.adjacency:
            return {}
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            du = dist[u]
            if du == radius:
                continue
            for v in self.adjacency[u]:
                if v not in dist:
                    dist[v] = du + 1
                    queue.append(v)
        del dist[source]
        return dist

    def edge_records(self) -> Iterator[tuple[str, ...]]:
        """Six-field records in canonical (sorted) order."""
        for sub, sup in sorted(self.edges):
            a, b = self.concepts[sub], self.concepts[sup]
            yield (a.id, a.name, a.type_tag, b.id, b.name, b.type_tag)


@dataclass
class IngestResult:
    graph: KnowledgeGraph
    kept: int = 0
    dropped: int = 0
    rejects: list[Reject] = field(default_factory=list)


def ingest_edges(lines: Iterable[str]) -> IngestResult:
    """Build a graph from six-field TSV records
    ``subId, subName, subType, superId, superName, superType``.

    Malformed lines go to ``rejects`` and ingest continues. Blank lines are
    skipped. Self-loops and repeated edges count as ``dropped``.
    """
    result = IngestResult(KnowledgeGraph())
    for line_no, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            result.rejects.append(Reject(line_no, f"expected 6 fields, got {len(fields)}", line))
            continue
        if not fields[1].strip() or not fields[4].strip():
            result.rejects.append(Reject(line_no, "empty concept name", line))
            continue
        sub = Concept(fields[0], fields[1], fields[2])
        sup = Concept(fields[3], fields[4], fields[5])
        if result.graph.add_edge(sub, sup):
            result.kept += 1
        else:
            result.dropped += 1
    return result


def ingest_file(path: str | Path) -> IngestResult:
    with open(path, encoding="utf-8", newline="") as fh:
        return ingest_edges(fh)


def bucket_hash(
    name: str,
    base_offset: int = 0,
    seed: int = DEFAULT_SEED,
    bucket_length: int = DEFAULT_BUCKET_LENGTH,
) -> int:
    """Offset of ``name`` inside the bucket starting at ``base_offset``.

    Polynomial fold ``k = k * seed + byte`` over the UTF-8 bytes, reduced
    modulo ``bucket_length``. Reducing at every step gives the same residue
    as the arbitrary-precision fold.
    """
    if bucket_length <= 0:
        raise ParameterError(f"bucket_length must be positive, got {bucket_length}")
    k = 0
    for byte in name.encode("utf-8"):
        k = (k * seed + byte) % bucket_length
    return base_offset + k


def is_power_of_two(k: int) -> bool:
    return isinstance(k, int) and k > 0 and k & (k - 1) == 0


def decompose_threshold(gamma: int) -> list[int]:
    """Set bits of ``gamma`` as powers of two, largest first (6 -> [4, 2])."""
    if not isinstance(gamma, int) or gamma < 1:
        raise ParameterError(f"threshold must be an integer >= 1, got {gamma!r}")
    return [1 << b for b in range(gamma.bit_length() - 1, -1, -1) if gamma >> b & 1]


class NeighborTable:
    """Map concept -> concepts at shortest distance exactly ``k``."""

    def __init__(
        self,
        k: int,
        entries: Mapping[str, Iterable[str]],
        buckets: list[list[str]] | None = None,
        seed: int = DEFAULT_SEED,
        bucket_length: int = DEFAULT_BUCKET_LENGTH,
    ) -> None:
        if not is_power_of_two(k):
            raise ParameterError(f"k must be a power of two, got {k!r}")
        if bucket_length <= 0:
            raise ParameterError(f"bucket_length must be positive, got {bucket_length}")
        self.k = k
        self.seed = seed
        self.bucket_length = bucket_length
        self.entries: dict[str, tuple[str, ...]] = {
            t: tuple(sorted(ns)) for t, ns in entries.items() if ns
        }
        if buckets is None:
            names = sorted(self.entries)
            buckets = [names[i:i + DEFAULT_BUCKET_CAPACITY]
                       for i in range(0, len(names), DEFAULT_BUCKET_CAPACITY)]
        self.buckets = [list(b) for b in buckets if b]
        self.bucket_of = {name: i for i, b in enumerate(self.buckets) for name in b}
        missing = set(self.entries) - set(self.bucket_of)
        if missing:
            raise ParameterError(f"{len(missing)} entries have no bucket")

    def __repr__(self) -> str:
        return f"NeighborTable(k={self.k}, {len(self.entries)} entries, {len(self.buckets)} buckets)"

    def __getitem__(self, name: str) -> tuple[str, ...]:
        return self.entries.get(name, ())

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NeighborTable):
            return NotImplemented
        return (self.k, self.seed, self.bucket_length, self.entries) == (
            other.k, other.seed, other.bucket_length, other.entries)

    @property
    def base_offsets(self) -> dict[int, int]:
        return {i: i * self.bucket_length for i in range(len(self.buckets))}

    def offset(self, name: str) -> int:
        """Total logical offset of ``name``; it must be stored in the table."""
        try:
            b = self.bucket_of[name]
        except KeyError:
            raise NotFound(name) from None
        return bucket_hash(name, b * self.bucket_length, self.seed, self.bucket_length)

    def to_bytes(self) -> bytes:
        body = io.BytesIO()
        refs = []
        pos = _HEADER.size + _BUCKET_REF.size * len(self.buckets)
        for b, names in enumerate(self.buckets):
            blob = self._encode_bucket(names)
            refs.append((b * self.bucket_length, pos, len(blob)))
            body.write(blob)
            pos += len(blob)
        directory = io.BytesIO()
        directory.write(struct.pack("<Q", len(self.bucket_of)))
        for name in sorted(self.bucket_of, key=lambda s: s.encode("utf-8")):
            _write_str(directory, name)
            directory.write(struct.pack("<I", self.bucket_of[name]))
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, 0, self.k, self.seed,
                              self.bucket_length, len(self.buckets), len(self.entries), pos)
        return b"".join([header, *(_BUCKET_REF.pack(*r) for r in refs),
                         body.getvalue(), directory.getvalue()])

    def _encode_bucket(self, names: list[str]) -> bytes:
        slots: dict[int, list[str]] = {}
        for name in names:
            slots.setdefault(bucket_hash(name, 0, self.seed, self.bucket_length), []).append(name)
        order = sorted(slots)
        entries = io.BytesIO()
        index = []
        prefix = 8 + _SLOT.size * len(order)
        for slot in order:
            chain = sorted(slots[slot])
            index.append(_SLOT.pack(slot, prefix + entries.tell(), len(chain)))
            for name in chain:
                _write_str(entries, name)
                nbrs = self.entries.get(name, ())
                entries.write(struct.pack("<I", len(nbrs)))
                for n in nbrs:
                    _write_str(entries, n)
        return b"".join([struct.pack("<II", len(names), len(order)), *index, entries.getvalue()])

    @classmethod
    def from_bytes(cls, data: bytes) -> "NeighborTable":
        try:
            return cls._decode(data)
        except (struct.error, UnicodeDecodeError, IndexError) as exc:
            raise StateCorruption(f"truncated or malformed neighbor table: {exc}") from exc

    @classmethod
    def _decode(cls, data: bytes) -> "NeighborTable":
        magic, version, _flags, k, seed, blen, nbuckets, n_total, dirpos = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise StateCorruption("bad magic bytes")
        if version != FORMAT_VERSION:
            raise StateCorruption(f"unsupported format version {version}")
        buckets: list[list[str]] = []
        entries: dict[str, list[str]] = {}
        for b in range(nbuckets):
            _base, fpos, _size = _BUCKET_REF.unpack_from(data, _HEADER.size + b * _BUCKET_REF.size)
            n_entries, n_slots = struct.unpack_from("<II", data, fpos)
            pos = fpos + 8 + _SLOT.size * n_slots
            members = []
            for _ in range(n_entries):
                name, pos = _read_str(data, pos)
                (count,) = struct.unpack_from("<I", data, pos)
                pos += 4
                nbrs = []
                for _ in range(count):
                    n, pos = _read_str(data, pos)
                    nbrs.append(n)
                members.append(name)
                entries[name] = nbrs
            buckets.append(sorted(members))
        (count,) = struct.unpack_from("<Q", data, dirpos)
        pos = dirpos + 8
        directory = {}
        for _ in range(count):
            name, pos = _read_str(data, pos)
            (directory[name],) = struct.unpack_from("<I", data, pos)
            pos += 4
        if pos != len(data):
            raise StateCorruption("trailing bytes after the directory")
        bucket_ids = {name: i for i, bk in enumerate(buckets) for name in bk}
        if count != n_total or directory != bucket_ids:
            raise StateCorruption("directory does not match the bucket contents")
        table = cls(k, entries, buckets=None, seed=seed, bucket_length=blen)
        # bucket order/membership comes from the file, not the default packing
        table.buckets = buckets
        table.bucket_of = {name: i for i, bk in enumerate(buckets) for name in bk}
        return table

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "NeighborTable":
        return cls.from_bytes(Path(path).read_bytes())


def _write_str(buf: io.BytesIO, s: str) -> None:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ParameterError(f"name too long to store: {s[:40]!r}...")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _read_str(data: bytes, pos: int) -> tuple[str, int]:
    (n,) = struct.unpack_from("<H", data, pos)
    end = pos + 2 + n
    if end > len(data):
        raise StateCorruption("string runs past end of data")
    return data[pos + 2:end].decode("utf-8"), end


class NeighborTableFile:
    """Random-access reader: one directory lookup plus one bucket read per query."""

    def __init__(self, path: str | Path) -> None:
        self._fh = open(path, "rb")
        head = self._fh.read(_HEADER.size)
        try:
            magic, version, _f, self.k, self.seed, self.bucket_length, nbuckets, _n, dirpos = \
                _HEADER.unpack(head)
        except struct.error as exc:
            raise StateCorruption(f"truncated header: {exc}") from exc
        if magic != MAGIC or version != FORMAT_VERSION:
            raise StateCorruption("not a neighbor table file")
        refs = self._fh.read(_BUCKET_REF.size * nbuckets)
        self._refs = [_BUCKET_REF.unpack_from(refs, i * _BUCKET_REF.size) for i in range(nbuckets)]
        self._fh.seek(dirpos)
        data = self._fh.read()
        (count,) = struct.unpack_from("<Q", data, 0)
        pos = 8
        self._directory: dict[str, int] = {}
        for _ in range(count):
            name, pos = _read_str(data, pos)
            (self._directory[name],) = struct.unpack_from("<I", data, pos)
            pos += 4
        self._slot_cache: dict[int, tuple[list[int], list[tuple[int, int]]]] = {}

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "NeighborTableFile":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _slots(self, bucket: int) -> tuple[list[int], list[tuple[int, int]]]:
        if bucket not in self._slot_cache:
            _base, fpos, _size = self._refs[bucket]
            self._fh.seek(fpos)
            _n, n_slots = struct.unpack("<II", self._fh.read(8))
            raw = self._fh.read(_SLOT.size * n_slots)
            rows = [_SLOT.unpack_from(raw, i * _SLOT.size) for i in range(n_slots)]
            self._slot_cache[bucket] = ([r[0] for r in rows], [(r[1], r[2]) for r in rows])
        return self._slot_cache[bucket]

    def neighbors(self, name: str) -> tuple[str, ...]:
        bucket = self._directory.get(name)
        if bucket is None:
            return ()
        slot = bucket_hash(name, 0, self.seed, self.bucket_length)
        keys, chains = self._slots(bucket)
        i = bisect.bisect_left(keys, slot)
        if i == len(keys) or keys[i] != slot:
            return ()
        rel, length = chains[i]
        _base, fpos, size = self._refs[bucket]
        self._fh.seek(fpos + rel)
        data = self._fh.read(size - rel)
        pos = 0
        for _ in range(length):
            entry, pos = _read_str(data, pos)
            (count,) = struct.unpack_from("<I", data, pos)
            pos += 4
            nbrs = []
            for _ in range(count):
                n, pos = _read_str(data, pos)
                nbrs.append(n)
            if entry == name:
                return tuple(nbrs)
        return ()


def locality_buckets(graph: KnowledgeGraph, names: Iterable[str], capacity: int) -> list[list[str]]:
    """Pack ``names`` into buckets of at most ``capacity`` in BFS order, so
    concepts that are expanded together land in the same bucket."""
    wanted = set(names)
    order: list[str] = []
    seen: set[str] = set()
    for root in sorted(wanted):
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            if u in wanted:
                order.append(u)
            for v in sorted(graph.neighbors(u)):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
    return [order[i:i + capacity] for i in range(0, len(order), capacity)]


def exact_distance_sets(graph: KnowledgeGraph, k: int, chunk: int = 2048) -> dict[str, list[str]]:
    """For every concept, the concepts at shortest undirected distance exactly ``k``.

    Row blocks of the identity are pushed through ``k`` boolean products with
    ``A + I``; a concept first reached at product ``k`` is exactly ``k`` away.
    Work follows the size of the balls, not the size of the graph.
    """
    if k == 1:
        return {t: sorted(ns) for t, ns in graph.adjacency.items() if ns}
    names = sorted(graph.adjacency)
    if not names:
        return {}
    index = {n: i for i, n in enumerate(names)}
    rows, cols = [], []
    for sub, sup in graph.edges:
        rows += [index[sub], index[sup]]
        cols += [index[sup], index[sub]]
    n = len(names)
    step = csr_matrix((np.ones(len(rows), dtype=np.int32), (rows, cols)), shape=(n, n))
    step = (step + identity(n, dtype=np.int32, format="csr")).astype(bool).astype(np.int32)
    out: dict[str, list[str]] = {}
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        reach = identity(n, dtype=np.int32, format="csr")[start:stop]
        before = reach
        for _ in range(k):
            before = reach
            reach = (reach @ step).astype(bool).astype(np.int32)
        ring = (reach - before).tocsr()
        ring.eliminate_zeros()
        for r in range(stop - start):
            lo, hi = ring.indptr[r], ring.indptr[r + 1]
            if hi > lo:
                out[names[start + r]] = [names[c] for c in ring.indices[lo:hi].tolist()]
    return out


def build_neighbor_table(
    graph: KnowledgeGraph,
    k: int,
    seed: int = DEFAULT_SEED,
    bucket_length: int = DEFAULT_BUCKET_LENGTH,
    bucket_capacity: int = DEFAULT_BUCKET_CAPACITY,
) -> NeighborTable:
    if not is_power_of_two(k):
        raise ParameterError(f"k must be a power of two, got {k!r}")
    entries = exact_distance_sets(graph, k)
    buckets = locality_buckets(graph, entries, bucket_capacity)
    return NeighborTable(k, entries, buckets, seed=seed, bucket_length=bucket_length)


def required_table_sizes(gamma: int) -> list[int]:
    """Powers of two needed to compose every distance 1..gamma."""
    return [1 << b for b in range(gamma.bit_length())]


def compose_neighbors(
    tables: Iterable[NeighborTable] | Mapping[int, NeighborTable],
    t: str,
    gamma: int,
) -> dict[str, int]:
    """Concepts within ``gamma`` of ``t`` with their minimum distances.

    Each distance d is reached by chaining the tables of d's binary
    decomposition; chains can also land on closer concepts with an inflated
    sum, so the minimum per concept is kept. ``t`` itself is excluded.
    """
    if gamma < 1:
        raise ParameterError(f"gamma must be >= 1, got {gamma}")
    by_k = dict(tables) if isinstance(tables, Mapping) else {tb.k: tb for tb in tables}
    absent = [k for k in required_table_sizes(gamma) if k not in by_k]
    if absent:
        raise ParameterError(f"missing neighbor tables for k={absent}")

    walks: dict[tuple[int, ...], set[str]] = {(): {t}}

    def walk(parts: tuple[int, ...]) -> set[str]:
        if parts not in walks:
            table = by_k[parts[-1]]
            reached: set[str] = set()
            for u in walk(parts[:-1]):
                reached.update(table[u])
            walks[parts] = reached
        return walks[parts]

    best: dict[str, int] = {}
    for d in range(1, gamma + 1):
        for c in walk(tuple(decompose_threshold(d))):
            if c != t and best.get(c, d + 1) > d:
                best[c] = d
    return best
