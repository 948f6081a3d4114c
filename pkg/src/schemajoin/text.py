"""Literal distance primitives: Levenshtein distance, q-grams, count filtering.

Edits are counted over Unicode code points, so a multi-byte character costs
one edit. Grams are unpadded: a string of length L has ``max(0, L - q + 1)``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import ParameterError

DEFAULT_Q = 2


def edit_distance(a: str, b: str) -> int:
    """Unit-cost Levenshtein distance between ``a`` and ``b``.

    Uses the bit-parallel formulation (Myers 1999, Hyyrö 2001): the shorter
    string becomes a bit pattern and each character of the longer one updates
    the vertical delta vectors in O(1) big-integer operations.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    m = len(b)
    if m == 0:
        return len(a)

    peq: dict[str, int] = {}
    for i, ch in enumerate(b):
        peq[ch] = peq.get(ch, 0) | (1 << i)

    mask = (1 << m) - 1
    last = 1 << (m - 1)
    pv, mv, score = mask, 0, m
    for ch in a:
        eq = peq.get(ch, 0)
        xv = eq | mv
        xh = ((((eq & pv) + pv) & mask) ^ pv) | eq
        ph = mv | (~(xh | pv) & mask)
        mh = pv & xh
        if ph & last:
            score += 1
        elif mh & last:
            score -= 1
        ph = ((ph << 1) | 1) & mask
        mh = (mh << 1) & mask
        pv = mh | (~(xv | ph) & mask)
        mv = ph & xv
    return score


def within_distance(a: str, b: str, limit: int) -> bool:
    """True when ``edit_distance(a, b) <= limit``; negative limits never match."""
    if limit < 0:
        return False
    if abs(len(a) - len(b)) > limit:
        return False
    return edit_distance(a, b) <= limit


@dataclass(frozen=True)
class GramSequence:
    source: str
    q: int
    grams: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.grams)

    def __iter__(self):
        return iter(self.grams)

    def counts(self) -> Counter:
        return Counter(self.grams)


def qgrams(s: str, q: int = DEFAULT_Q) -> GramSequence:
    if q < 1:
        raise ParameterError(f"q must be >= 1, got {q}")
    grams = tuple(s[i:i + q] for i in range(len(s) - q + 1))
    return GramSequence(s, q, grams)


def shared_gram_count(a: str, b: str, q: int = DEFAULT_Q) -> int:
    """Multiset intersection size of the q-grams of ``a`` and ``b``."""
    ca, cb = qgrams(a, q).counts(), qgrams(b, q).counts()
    return sum((ca & cb).values())


def count_filter_bound(len_a: int, len_b: int, q: int, epsilon_t: int) -> int:
    """Minimum number of shared q-grams for two strings within ``epsilon_t``.

    May be zero or negative, in which case the filter prunes nothing.
    """
    return (max(len_a, len_b) - q + 1) - q * epsilon_t


def probe_threshold(len_s: int, q: int, epsilon_t: int) -> int:
    """Probe-side occurrence threshold ``|s| - q + 1 - epsilon_t * q``."""
    return len_s - q + 1 - epsilon_t * q
