"""Inverted q-gram index: gram hash -> (string, occurrence count) postings.

Strings are case-folded before gram extraction. Probes whose count threshold
``|s| - q + 1 - epsilon_t * q`` is not positive cannot be answered by count
filtering; :meth:`InvertedIndex.candidates` then scans the strings whose
length is within ``epsilon_t`` of the probe instead.
"""
from __future__ import annotations

import struct
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ParameterError, StateCorruption
from .text import DEFAULT_Q, probe_threshold, qgrams

_MASK64 = (1 << 64) - 1
_MAGIC = b"SJQI"
_VERSION = 1


def gram_hash(gram: str) -> int:
    """64-bit polynomial hash over the UTF-8 bytes of ``gram``."""
    h = 0
    for byte in gram.encode("utf-8"):
        h = (h * 1_099_511_628_211 + byte + 1) & _MASK64
    return h


def fold(s: str) -> str:
    return s.lower()


@dataclass
class ProbeResult:
    candidates: list[tuple[str, int]] = field(default_factory=list)
    fallback: bool = False


class InvertedIndex:
    def __init__(self, q: int = DEFAULT_Q) -> None:
        if q < 1:
            raise ParameterError(f"q must be >= 1, got {q}")
        self.q = q
        self.postings: dict[int, list[tuple[str, int]]] = defaultdict(list)
        self.keys: dict[str, str] = {}
        self.by_length: dict[int, list[str]] = defaultdict(list)
        # strings shorter than q: reachable only through the length scan
        self.probe_only: set[str] = set()

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, ref: object) -> bool:
        return ref in self.keys

    def add(self, ref: str) -> None:
        if ref in self.keys:
            return
        key = fold(ref)
        self.keys[ref] = key
        self.by_length[len(key)].append(ref)
        grams = qgrams(key, self.q)
        if not grams:
            self.probe_only.add(ref)
        for gram, count in grams.counts().items():
            self.postings[gram_hash(gram)].append((ref, count))

    def probe(self, s: str, epsilon_t: int) -> ProbeResult:
        """Strings sharing at least ``|s| - q + 1 - epsilon_t * q`` grams with ``s``.

        When that threshold is not positive, returns ``fallback=True`` and no
        candidates: count filtering cannot exclude anything.
        """
        key = fold(s)
        threshold = probe_threshold(len(key), self.q, epsilon_t)
        if threshold <= 0:
            return ProbeResult(fallback=True)
        shared: Counter = Counter()
        for gram, c_s in qgrams(key, self.q).counts().items():
            for ref, c_a in self.postings.get(gram_hash(gram), ()):
                shared[ref] += min(c_s, c_a)
        hits = [(ref, n) for ref, n in shared.items() if n >= threshold]
        hits.sort()
        return ProbeResult(hits)

    def length_scan(self, s: str, epsilon_t: int) -> list[str]:
        n = len(fold(s))
        out = []
        for length in range(max(0, n - epsilon_t), n + epsilon_t + 1):
            out.extend(self.by_length.get(length, ()))
        return sorted(out)

    def candidates(self, s: str, epsilon_t: int) -> list[str]:
        """Superset of the indexed strings within ``epsilon_t`` edits of ``s``."""
        result = self.probe(s, epsilon_t)
        if result.fallback:
            return self.length_scan(s, epsilon_t)
        return [ref for ref, _ in result.candidates]

    def to_bytes(self) -> bytes:
        refs = sorted(self.keys)
        pos = {r: i for i, r in enumerate(refs)}
        parts = [struct.pack("<4sHHQ", _MAGIC, _VERSION, self.q, len(refs))]
        for r in refs:
            raw = r.encode("utf-8")
            parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack("<Q", len(self.postings)))
        for h in sorted(self.postings):
            plist = sorted((pos[r], c) for r, c in self.postings[h])
            parts.append(struct.pack("<QI", h, len(plist)))
            parts.extend(struct.pack("<II", i, c) for i, c in plist)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "InvertedIndex":
        try:
            magic, version, q, n = struct.unpack_from("<4sHHQ", data, 0)
            if magic != _MAGIC or version != _VERSION:
                raise StateCorruption("not a q-gram index file")
            off = struct.calcsize("<4sHHQ")
            refs = []
            for _ in range(n):
                (length,) = struct.unpack_from("<I", data, off)
                refs.append(data[off + 4:off + 4 + length].decode("utf-8"))
                off += 4 + length
            index = cls(q)
            for r in refs:
                index.add(r)
            # postings rebuilt from refs must match the stored records
            (nposts,) = struct.unpack_from("<Q", data, off)
            if nposts != len(index.postings):
                raise StateCorruption("posting count mismatch")
        except (struct.error, UnicodeDecodeError) as exc:
            raise StateCorruption(f"malformed q-gram index: {exc}") from exc
        return index

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        return cls.from_bytes(Path(path).read_bytes())


def build_index(attrs: Iterable[str], q: int = DEFAULT_Q) -> InvertedIndex:
    index = InvertedIndex(q)
    for a in attrs:
        index.add(a)
    return index
