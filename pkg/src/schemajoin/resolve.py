"""Post-join cleanup: split clusters that break transitivity, check sample
values, and keep a manual review queue.

A pair of attributes is compatible when it is literally close
(``dis_t <= epsilon_t``) or when both are anchored in the knowledge base and
their concepts are within the tolerance ``beta * gamma``. Vetoed pairs and
pairs whose sample values contradict each other are never compatible.
"""
from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import ParameterError
from .kb import KnowledgeGraph
from .qgram_index import fold
from .text import edit_distance

DEFAULT_BETA = 1.5
DOMINANCE = 0.8

VERDICTS = ("pending", "accept", "reject")


@dataclass(frozen=True)
class ResolveConfig:
    beta: float = DEFAULT_BETA
    gamma: int = 3
    epsilon_t: int = 1

    def __post_init__(self) -> None:
        if not self.beta > 1:
            raise ParameterError(f"beta must be > 1, got {self.beta}")
        if self.gamma < 1:
            raise ParameterError(f"gamma must be >= 1, got {self.gamma}")
        if self.epsilon_t < 0:
            raise ParameterError(f"epsilon_t must be >= 0, got {self.epsilon_t}")

    @property
    def tolerance(self) -> Fraction:
        return Fraction(self.beta).limit_denominator(1_000_000) * self.gamma


# ---------------------------------------------------------------- values

_INT = re.compile(r"[+-]?\d+")
_DEC = re.compile(r"[+-]?(\d+\.\d*|\.\d+)")
_MONTHS = "jan|feb|mar|apr|may|jun|jul|aug|sep|oct|nov|dec"
_DATES = [
    re.compile(r"\d{4}-\d{1,2}-\d{1,2}"),
    re.compile(r"\d{4}/\d{1,2}/\d{1,2}"),
    re.compile(r"\d{1,2}/\d{1,2}/\d{2,4}"),
    re.compile(r"\d{1,2}\.\d{1,2}\.\d{4}"),
    re.compile(r"\d{4}-\d{2}"),
    re.compile(rf"({_MONTHS})[a-z]*[-\s]\d{{1,4}}", re.I),
    re.compile(rf"\d{{1,2}}[-\s]({_MONTHS})[a-z]*([-\s]\d{{2,4}})?", re.I),
]
_LIST_DELIMS = (",", ";", "|")
_PREFIX = re.compile(r"^[^\w\s+\-.]+")
_SUFFIX = re.compile(r"[^\w\s.]+$")


def infer_type(sample: str) -> str:
    s = sample.strip()
    if _INT.fullmatch(s):
        return "integer"
    if _DEC.fullmatch(s):
        return "decimal"
    if any(p.fullmatch(s) for p in _DATES):
        return "date"
    for delim in _LIST_DELIMS:
        parts = [p.strip() for p in s.split(delim)]
        if len(parts) >= 2 and all(parts):
            return "list"
    return "string"


def _dominant(labels: Sequence[str]) -> str | None:
    if not labels:
        return None
    label, n = Counter(labels).most_common(1)[0]
    return label if n / len(labels) >= DOMINANCE else None


def dominant_type(samples: Sequence[str]) -> str | None:
    return _dominant([infer_type(s) for s in samples])


def dominant_affixes(samples: Sequence[str]) -> tuple[str | None, str | None]:
    prefixes, suffixes = [], []
    for s in samples:
        s = s.strip()
        m = _PREFIX.match(s)
        prefixes.append(m.group(0) if m else "")
        m = _SUFFIX.search(s)
        suffixes.append(m.group(0) if m else "")
    return _dominant(prefixes) or None, _dominant(suffixes) or None


def _types_compatible(a: str, b: str) -> bool:
    return a == b or {a, b} == {"integer", "decimal"}


@dataclass
class ValueCheck:
    passed: bool
    rule: str | None = None  # rule that decided: "type", "affix", or None
    applicable: bool = True


def value_verify(a_samples: Sequence[str] | None, b_samples: Sequence[str] | None) -> ValueCheck:
    """Type rule, then affix rule, on the sample values of two attributes.

    Either side without samples makes the check inapplicable (and passing).
    """
    if not a_samples or not b_samples:
        return ValueCheck(True, None, applicable=False)
    ta, tb = dominant_type(a_samples), dominant_type(b_samples)
    if ta is not None and tb is not None and not _types_compatible(ta, tb):
        return ValueCheck(False, "type")
    pa, sa = dominant_affixes(a_samples)
    pb, sb = dominant_affixes(b_samples)
    if pa and pb and pa != pb:
        return ValueCheck(False, "affix")
    if sa and sb and sa != sb:
        return ValueCheck(False, "affix")
    fired = "affix" if (pa and pb) or (sa and sb) else ("type" if ta and tb else None)
    return ValueCheck(True, fired)


# ---------------------------------------------------------------- review

def pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def review_id(a: str, b: str) -> str:
    x, y = pair_key(a, b)
    return hashlib.sha1(f"{x}\x00{y}".encode("utf-8")).hexdigest()[:16]


@dataclass
class ReviewItem:
    id: str
    left: str
    right: str
    cluster: str
    literal_distance: int | None
    semantic_distance: int | None
    left_values: list[str] = field(default_factory=list)
    right_values: list[str] = field(default_factory=list)
    reason: str = ""
    verdict: str = "pending"

    def to_doc(self) -> dict:
        return asdict(self)

    @classmethod
    def from_doc(cls, doc: Mapping) -> "ReviewItem":
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__ if k in doc})


@dataclass
class ImportReport:
    applied: list[str] = field(default_factory=list)
    unknown: list[str] = field(default_factory=list)
    invalid: list[str] = field(default_factory=list)


class ReviewQueue:
    def __init__(self, items: Iterable[ReviewItem] = ()) -> None:
        self.items: dict[str, ReviewItem] = {i.id: i for i in items}

    def __len__(self) -> int:
        return len(self.items)

    def add(self, item: ReviewItem) -> ReviewItem:
        # a decided item is never reopened
        return self.items.setdefault(item.id, item)

    def pending(self) -> list[ReviewItem]:
        return [i for _, i in sorted(self.items.items()) if i.verdict == "pending"]

    def decided(self, verdict: str) -> set[tuple[str, str]]:
        return {pair_key(i.left, i.right) for i in self.items.values() if i.verdict == verdict}

    def export(self) -> list[dict]:
        return [i.to_doc() for i in self.pending()]

    def apply(self, decisions: Iterable[Mapping]) -> ImportReport:
        """Apply ``{"id", "verdict"}`` records. Only pending items change."""
        report = ImportReport()
        for doc in decisions:
            item_id = str(doc.get("id", ""))
            verdict = doc.get("verdict")
            item = self.items.get(item_id)
            if item is None:
                report.unknown.append(item_id)
                continue
            if verdict == "pending" or verdict == item.verdict:
                continue
            if verdict not in VERDICTS or item.verdict != "pending":
                report.invalid.append(item_id)
                continue
            item.verdict = verdict
            report.applied.append(item_id)
        return report

    def to_docs(self) -> list[dict]:
        return [self.items[k].to_doc() for k in sorted(self.items)]


@dataclass
class Candidate:
    """A proposed merge of attribute ``left`` into the cluster holding ``right``."""

    left: str
    right: str
    kind: str
    cluster: str = ""
    literal_distance: int | None = None
    semantic_distance: int | None = None


def verify(
    candidates: Iterable[Candidate],
    values: Mapping[str, Sequence[str]],
    queue: ReviewQueue,
) -> list[Candidate]:
    """Keep candidates that pass value verification or were accepted by a
    reviewer; vetoed ones are dropped, failing ones are queued for review."""
    rejected = queue.decided("reject")
    accepted = queue.decided("accept")
    confirmed = []
    for c in candidates:
        key = pair_key(c.left, c.right)
        if key in rejected:
            continue
        if key in accepted:
            confirmed.append(c)
            continue
        check = value_verify(values.get(c.left), values.get(c.right))
        if check.passed:
            confirmed.append(c)
        else:
            queue.add(ReviewItem(
                review_id(c.left, c.right), c.left, c.right, c.cluster,
                c.literal_distance, c.semantic_distance,
                list(values.get(c.left, ())), list(values.get(c.right, ())),
                reason=f"{check.rule} rule failed",
            ))
    return confirmed


# ---------------------------------------------------------------- distances

class DistancePolicy:
    """Pairwise distances between attributes for resolve.

    ``semantic`` is the shortest path between the two anchor concepts, or
    ``None`` when either side is unanchored or the path is longer than
    ``horizon``.
    """

    def __init__(
        self,
        cfg: ResolveConfig,
        graph: KnowledgeGraph | None = None,
        anchors: Mapping[str, str | None] | None = None,
        values: Mapping[str, Sequence[str]] | None = None,
        vetoes: Iterable[tuple[str, str]] = (),
        accepted: Iterable[tuple[str, str]] = (),
    ) -> None:
        self.cfg = cfg
        self.graph = graph
        self.anchors = anchors or {}
        self.values = values or {}
        self.vetoes = {pair_key(*p) for p in vetoes}
        self.accepted = {pair_key(*p) for p in accepted}
        self.horizon = math.floor(cfg.tolerance)
        self._balls: dict[str, dict[str, int]] = {}

    def literal(self, a: str, b: str) -> int:
        return edit_distance(fold(a), fold(b))

    def semantic(self, a: str, b: str) -> int | None:
        ca, cb = self.anchors.get(a), self.anchors.get(b)
        if ca is None or cb is None or self.graph is None:
            return None
        if ca == cb:
            return 0
        if ca not in self._balls:
            self._balls[ca] = self.graph.ball(ca, self.horizon)
        return self._balls[ca].get(cb)

    def ratio(self, a: str, b: str) -> float:
        """Distance relative to tolerance; a pair is compatible when <= 1."""
        key = pair_key(a, b)
        if key in self.vetoes:
            return math.inf
        if key in self.accepted:
            return 0.0
        if not value_verify(self.values.get(a), self.values.get(b)).passed:
            return math.inf
        eps = self.cfg.epsilon_t
        lit = self.literal(a, b)
        best = lit / eps if eps > 0 else (0.0 if lit == 0 else math.inf)
        sem = self.semantic(a, b)
        if sem is not None:
            best = min(best, float(Fraction(sem) / self.cfg.tolerance))
        return best

    def compatible(self, a: str, b: str) -> bool:
        return self.ratio(a, b) <= 1


# ---------------------------------------------------------------- resolve

def split_members(
    members: Iterable[str],
    policy: DistancePolicy,
    on_bridge=None,
) -> list[frozenset[str]]:
    """Split ``members`` into parts whose pairs are all compatible.

    Repeatedly takes the least compatible pair, seeds one part with each end
    and places every other member in each part whose seed it is compatible
    with (bridging members go to both). Members compatible with neither seed
    go to the nearer one. Parts contained in another part are dropped.
    ``on_bridge(x, a, b)`` is called for every bridging member ``x``.
    """
    todo = [frozenset(members)]
    done: list[frozenset[str]] = []
    while todo:
        part = todo.pop()
        ordered = sorted(part)
        worst = None
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                r = policy.ratio(a, b)
                if r > 1 and (worst is None or r > worst[0]):
                    worst = (r, a, b)
        if worst is None:
            done.append(part)
            continue
        _, a, b = worst
        side_a, side_b = {a}, {b}
        for x in ordered:
            if x in (a, b):
                continue
            ra, rb = policy.ratio(x, a), policy.ratio(x, b)
            if ra <= 1:
                side_a.add(x)
            if rb <= 1:
                side_b.add(x)
            if ra > 1 and rb > 1:
                (side_a if ra <= rb else side_b).add(x)
            elif ra <= 1 and rb <= 1 and on_bridge is not None:
                on_bridge(x, a, b)
        todo.append(frozenset(side_b))
        todo.append(frozenset(side_a))
    unique = sorted(set(done), key=lambda p: (-len(p), sorted(p)))
    kept: list[frozenset[str]] = []
    for p in unique:
        if not any(p <= k for k in kept):
            kept.append(p)
    return sorted(kept, key=sorted)


def resolve_family(
    families: Iterable[Iterable[str]],
    policy: DistancePolicy,
    on_bridge=None,
) -> list[frozenset[str]]:
    out: list[frozenset[str]] = []
    for members in families:
        out.extend(split_members(members, policy, on_bridge))
    return out


def violating_pairs(members: Iterable[str], policy: DistancePolicy) -> list[tuple[str, str]]:
    ordered = sorted(members)
    return [(a, b) for i, a in enumerate(ordered) for b in ordered[i + 1:]
            if not policy.compatible(a, b)]
