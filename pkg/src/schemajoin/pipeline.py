"""Batch and incremental integration of schema corpora into attribute clusters.

Batch: every attribute starts as a singleton, literally similar clusters are
self-joined, anchored clusters are joined through the knowledge base, and
resolve splits whatever broke transitivity.

Incremental: a new schema's attributes are literally matched against the
existing clusters and their frontiers, the matches are value-verified, the
rest are joined through the knowledge base with degree-capped frontiers, and
the touched clusters are resolved.
"""
from __future__ import annotations

import json
import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .cluster import ClusterRegistry, ClusterSet
from .ed_join import ed_join
from .errors import DataError, ParameterError, StateCorruption
from .kb import (
    DEFAULT_BUCKET_CAPACITY,
    DEFAULT_BUCKET_LENGTH,
    DEFAULT_SEED,
    KnowledgeGraph,
    NeighborTable,
    build_neighbor_table,
    ingest_file,
)
from .normalize import Dictionaries, TokenizedAttribute, normalize_corpus
from .resolve import (
    Candidate,
    DistancePolicy,
    ImportReport,
    ResolveConfig,
    ReviewItem,
    ReviewQueue,
    review_id,
    split_members,
    verify,
)
from .semantic_join import DEFAULT_FRONTIER_CAP, ConceptMatcher, capped_neighbors, semantic_join
from .text import DEFAULT_Q

STATE_FORMAT = "schemajoin-state"
STATE_VERSION = 1


# ---------------------------------------------------------------- inputs

@dataclass
class Attribute:
    name: str
    values: list[str] = field(default_factory=list)


@dataclass
class Schema:
    id: str
    name: str
    attributes: list[Attribute]

    @classmethod
    def from_doc(cls, doc: Mapping) -> "Schema":
        if not isinstance(doc, Mapping) or "id" not in doc:
            raise DataError("schema document needs an 'id'")
        attrs = []
        for a in doc.get("attributes") or []:
            if isinstance(a, str):
                a = {"name": a}
            if not isinstance(a, Mapping):
                raise DataError(f"schema {doc['id']}: attribute must be a string or object")
            name = a.get("name")
            if not isinstance(name, str) or not name.strip():
                raise DataError(f"schema {doc['id']}: empty attribute name")
            values = a.get("values") or []
            if not isinstance(values, list):
                raise DataError(f"schema {doc['id']}: values of {name!r} must be a list")
            attrs.append(Attribute(name, [str(v) for v in values]))
        return cls(str(doc["id"]), str(doc.get("name", "")), attrs)


def read_schemas(lines: Iterable[str]) -> list[Schema]:
    """Parse newline-delimited schema documents; blank lines are skipped."""
    out: list[Schema] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {line_no}: {exc.msg}") from None
        try:
            schema = Schema.from_doc(doc)
        except DataError as exc:
            raise DataError(f"line {line_no}: {exc}") from None
        if schema.id in seen:
            raise DataError(f"line {line_no}: duplicate schema id {schema.id!r}")
        seen.add(schema.id)
        out.append(schema)
    return out


def read_schema_file(path: str | Path) -> list[Schema]:
    with open(path, encoding="utf-8") as fh:
        return read_schemas(fh)


@dataclass(frozen=True)
class IntegrationParams:
    epsilon_t: int = 1
    gamma: int = 3
    beta: float = 1.5
    q: int = DEFAULT_Q
    frontier_cap: int = DEFAULT_FRONTIER_CAP

    def __post_init__(self) -> None:
        if self.epsilon_t < 0:
            raise ParameterError(f"epsilon_t must be >= 0, got {self.epsilon_t}")
        if self.gamma < 1:
            raise ParameterError(f"gamma must be >= 1, got {self.gamma}")
        if not self.beta > 1:
            raise ParameterError(f"beta must be > 1, got {self.beta}")
        if self.q < 1:
            raise ParameterError(f"q must be >= 1, got {self.q}")
        if self.frontier_cap < 0:
            raise ParameterError(f"frontier_cap must be >= 0, got {self.frontier_cap}")

    @property
    def resolve_config(self) -> ResolveConfig:
        return ResolveConfig(self.beta, self.gamma, self.epsilon_t)

    def to_doc(self) -> dict:
        return {"epsilon_t": self.epsilon_t, "gamma": self.gamma, "beta": self.beta,
                "q": self.q, "frontier_cap": self.frontier_cap}


# ---------------------------------------------------------------- knowledge base

class KnowledgeBase:
    """The concept graph plus its neighbor tables, stored as a directory:
    ``edges.tsv``, one ``h{k}.nbt`` per table and ``meta.json``."""

    def __init__(self, graph: KnowledgeGraph, tables: Mapping[int, NeighborTable], q: int = DEFAULT_Q) -> None:
        if 1 not in tables:
            raise ParameterError("a knowledge base needs the 1-hop table")
        self.graph = graph
        self.tables = dict(sorted(tables.items()))
        self.q = q
        self._matcher: ConceptMatcher | None = None

    @classmethod
    def build(
        cls,
        graph: KnowledgeGraph,
        ks: Iterable[int] = (1, 2),
        seed: int = DEFAULT_SEED,
        bucket_length: int = DEFAULT_BUCKET_LENGTH,
        bucket_capacity: int = DEFAULT_BUCKET_CAPACITY,
    ) -> "KnowledgeBase":
        ks = sorted(set(ks) | {1})
        tables = {k: build_neighbor_table(graph, k, seed, bucket_length, bucket_capacity) for k in ks}
        return cls(graph, tables)

    @property
    def matcher(self) -> ConceptMatcher:
        if self._matcher is None:
            self._matcher = ConceptMatcher(self.graph, self.q)
        return self._matcher

    def usable_tables(self, gamma: int) -> dict[int, NeighborTable]:
        return {k: t for k, t in self.tables.items() if k <= gamma}

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "edges.tsv", "w", encoding="utf-8", newline="") as fh:
            for rec in self.graph.edge_records():
                fh.write("\t".join(rec) + "\n")
        for k, table in self.tables.items():
            table.save(d / f"h{k}.nbt")
        first = self.tables[1]
        meta = {"concepts": len(self.graph), "edges": len(self.graph.edges),
                "tables": list(self.tables), "seed": first.seed,
                "bucket_length": first.bucket_length}
        (d / "meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory: str | Path) -> "KnowledgeBase":
        d = Path(directory)
        if not (d / "meta.json").is_file():
            raise FileNotFoundError(f"no knowledge base at {d}")
        try:
            meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
            ks = [int(k) for k in meta["tables"]]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise StateCorruption(f"{d / 'meta.json'}: {exc}") from None
        graph = ingest_file(d / "edges.tsv").graph
        if len(graph) != meta.get("concepts") or len(graph.edges) != meta.get("edges"):
            raise StateCorruption(f"{d}: edge file does not match meta.json counts")
        tables = {k: NeighborTable.load(d / f"h{k}.nbt") for k in ks}
        for k, t in tables.items():
            if t.k != k:
                raise StateCorruption(f"{d / f'h{k}.nbt'} holds a {t.k}-hop table")
        return cls(graph, tables)


# ---------------------------------------------------------------- state

@dataclass
class IntegrationReport:
    added: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    merges: int = 0
    queued: int = 0
    unanchored: list[str] = field(default_factory=list)
    normalization_errors: dict[str, dict[str, str]] = field(default_factory=dict)


@dataclass
class IntegrationState:
    params: IntegrationParams = field(default_factory=IntegrationParams)
    registry: ClusterRegistry = field(default_factory=ClusterRegistry)
    anchors: dict[str, str | None] = field(default_factory=dict)
    values: dict[str, list[str]] = field(default_factory=dict)
    review: ReviewQueue = field(default_factory=ReviewQueue)
    labels: dict[tuple[str, ...], str] = field(default_factory=dict)
    schemas: set[str] = field(default_factory=set)

    def policy(self, kb: KnowledgeBase | None) -> DistancePolicy:
        return DistancePolicy(
            self.params.resolve_config,
            kb.graph if kb is not None else None,
            self.anchors,
            self.values,
            vetoes=self.review.decided("reject"),
            accepted=self.review.decided("accept"),
        )

    def refresh_labels(self, kb: KnowledgeBase | None) -> None:
        live = {c.key(): c for c in self.registry.live()}
        self.labels = {k: v for k, v in self.labels.items() if k in live}
        policy = None
        for key in live:
            if key not in self.labels:
                policy = policy or self.policy(kb)
                self.labels[key] = representative(key, policy)

    def to_doc(self) -> dict:
        clusters = []
        for i, c in enumerate(self.registry.live()):
            doc = c.to_doc()
            doc["id"] = i
            doc["representative"] = self.labels.get(c.key(), min(c.members))
            clusters.append(doc)
        return {
            "format": STATE_FORMAT,
            "version": STATE_VERSION,
            "params": self.params.to_doc(),
            "schemas": sorted(self.schemas),
            "clusters": clusters,
            "anchors": {a: self.anchors.get(a) for a in sorted(self.registry.attributes())},
            "values": {a: v for a, v in sorted(self.values.items()) if v},
            "review": self.review.to_docs(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_doc(cls, doc: Mapping) -> "IntegrationState":
        try:
            if doc.get("format") != STATE_FORMAT or doc.get("version") != STATE_VERSION:
                raise StateCorruption("not a schemajoin state document")
            state = cls(IntegrationParams(**doc["params"]))
            for c in doc["clusters"]:
                frontier = {e["concept"]: int(e["distance"]) for e in c["frontier"]}
                cluster = state.registry.add(c["attributes"], frontier)
                state.labels[cluster.key()] = c.get("representative") or min(cluster.members)
            state.anchors = {a: v for a, v in doc["anchors"].items()}
            state.values = {a: list(v) for a, v in doc["values"].items()}
            state.review = ReviewQueue(ReviewItem.from_doc(d) for d in doc["review"])
            state.schemas = set(doc.get("schemas", []))
        except StateCorruption:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise StateCorruption(f"malformed state document: {exc!r}") from None
        return state

    def save(self, path: str | Path) -> None:
        path = Path(path)
        text = self.dumps()
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "IntegrationState":
        text = Path(path).read_text(encoding="utf-8")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StateCorruption(f"{path}: {exc}") from None
        if not isinstance(doc, dict):
            raise StateCorruption(f"{path}: top level is not an object")
        return cls.from_doc(doc)


def representative(members: Iterable[str], policy: DistancePolicy) -> str:
    """Member with the smallest summed distance to the others, ties by name."""
    ordered = sorted(members)
    best = None
    for a in ordered:
        total = sum(policy.ratio(a, b) for b in ordered if b != a)
        if best is None or total < best[0]:
            best = (total, a)
    return best[1]


# ---------------------------------------------------------------- steps

def anchor_attributes(
    names: Iterable[str],
    tokenized: Mapping[str, TokenizedAttribute],
    matcher: ConceptMatcher | None,
    epsilon_t: int,
) -> dict[str, str | None]:
    """Anchor each name by its raw text, then its token phrase, then its keyword."""
    out: dict[str, str | None] = {}
    for name in names:
        out[name] = None
        if matcher is None:
            continue
        texts = [name]
        tok = tokenized.get(name)
        if tok is not None:
            texts += [tok.phrase, tok.keyword]
        for text in texts:
            hit = matcher.anchor(text, epsilon_t)
            if hit is not None:
                out[name] = hit[0]
                break
    return out


def member_frontier(attribute: str, state: IntegrationState, kb: KnowledgeBase) -> dict[str, int]:
    concept = state.anchors.get(attribute)
    if concept is None or concept not in kb.graph:
        return {}
    out = {concept: 0}
    nbrs = capped_neighbors(kb.graph.degree, kb.tables[1][concept], state.params.frontier_cap)
    out.update({n: 1 for n in nbrs})
    return out


def resolve_clusters(
    state: IntegrationState,
    kb: KnowledgeBase | None,
    clusters: Iterable[ClusterSet] | None = None,
) -> int:
    """Split the given clusters (default: all) into compatible parts.

    Returns the number of clusters that were split. Bridging pairs are
    queued for review.
    """
    registry = state.registry
    policy = state.policy(kb)
    todo = registry.live() if clusters is None else list(clusters)
    split = 0
    for cluster in todo:
        if cluster.id not in registry.clusters:
            continue
        rep = min(cluster.members)

        def queue_bridge(x: str, a: str, b: str, rep=rep) -> None:
            for seed in (a, b):
                state.review.add(ReviewItem(
                    review_id(x, seed), *sorted((x, seed)), rep,
                    policy.literal(x, seed), policy.semantic(x, seed),
                    list(state.values.get(min(x, seed), ())),
                    list(state.values.get(max(x, seed), ())),
                    reason="bridging",
                ))

        parts = split_members(cluster.members, policy, queue_bridge)
        if len(parts) == 1 and parts[0] == cluster.members:
            continue
        split += 1
        registry.retire(cluster)
        others = [frozenset(c.members) for c in registry.clusters.values()]
        for part in parts:
            if any(part <= o for o in others):
                continue
            if kb is None:
                frontier = dict(cluster.frontier)
            else:
                frontier = {}
                for m in part:
                    for concept, d in member_frontier(m, state, kb).items():
                        if d < frontier.get(concept, d + 1):
                            frontier[concept] = d
            registry.add(part, frontier)
            others.append(part)
    return split


def _collect(schemas: Sequence[Schema]) -> tuple[list[str], dict[str, list[str]], dict[str, str]]:
    names: list[str] = []
    values: dict[str, list[str]] = {}
    origin: dict[str, str] = {}
    for s in schemas:
        for a in s.attributes:
            if a.name not in origin:
                names.append(a.name)
                origin[a.name] = s.id
            if a.values:
                values.setdefault(a.name, [])
                values[a.name].extend(a.values)
    return names, values, origin


def _errors_by_schema(errors: Mapping[str, str], schemas: Sequence[Schema]) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    for s in schemas:
        for a in s.attributes:
            if a.name in errors:
                out.setdefault(s.id, {})[a.name] = errors[a.name]
    return out


def batch_integrate(
    schemas: Sequence[Schema],
    params: IntegrationParams | None = None,
    kb: KnowledgeBase | None = None,
    dicts: Dictionaries | None = None,
) -> tuple[IntegrationState, IntegrationReport]:
    params = params or IntegrationParams()
    state = IntegrationState(params)
    report = IntegrationReport()
    names, values, _ = _collect(schemas)
    state.values = values
    state.schemas = {s.id for s in schemas}
    report.added = list(names)
    if not names:
        return state, report

    tokenized, errors = normalize_corpus(names, dicts)
    report.normalization_errors = _errors_by_schema(errors, schemas)

    registry = state.registry
    for n in sorted(names):
        registry.singleton(n)
    live = registry.live()
    res = ed_join(registry, live, live, params.epsilon_t, params.q, member_only=True)
    report.merges += len(res.pairs)

    state.anchors = anchor_attributes(sorted(names), tokenized, kb.matcher if kb else None, params.epsilon_t)
    report.unanchored = sorted(n for n, c in state.anchors.items() if c is None)
    if kb is not None:
        sem = semantic_join(registry, registry.live(), state.anchors, params.gamma,
                            kb.usable_tables(params.gamma))
        report.merges += len(sem.merges)

    before = len(state.review)
    resolve_clusters(state, kb)
    report.queued = len(state.review) - before
    state.refresh_labels(kb)
    return state, report


def incremental_integrate(
    schema: Schema,
    state: IntegrationState,
    kb: KnowledgeBase | None = None,
    dicts: Dictionaries | None = None,
) -> IntegrationReport:
    """Insert one schema into ``state`` in place.

    Attributes that are already integrated are skipped, so inserting a
    schema twice changes nothing the second time.
    """
    params = state.params
    registry = state.registry
    report = IntegrationReport()
    new: list[str] = []
    for a in schema.attributes:
        if a.name in registry or a.name in new:
            report.skipped.append(a.name)
        else:
            new.append(a.name)
    if not new:
        return report
    report.added = list(new)
    state.schemas.add(schema.id)
    for a in schema.attributes:
        if a.name in new and a.values:
            state.values.setdefault(a.name, []).extend(a.values)

    tokenized, errors = normalize_corpus(sorted(registry.attributes() | set(new)), dicts)
    if any(n in errors for n in new):
        report.normalization_errors = {schema.id: {n: errors[n] for n in new if n in errors}}

    existing = registry.live()
    fresh = [registry.singleton(n) for n in sorted(new)]

    # literal matches against the new and the existing clusters, then verify
    res = ed_join(registry, fresh, fresh + existing, params.epsilon_t, params.q, merge=False)
    candidates = [Candidate(p.left, p.right, p.kind, p.target, p.distance, None) for p in res.pairs]
    before = len(state.review)
    for c in verify(candidates, state.values, state.review):
        here, there = registry.locate(c.left), registry.locate(c.cluster)
        if here.id != there.id:
            registry.pair_join(here, there)
            report.merges += 1

    matcher = kb.matcher if kb is not None else None
    state.anchors.update(anchor_attributes(sorted(new), tokenized, matcher, params.epsilon_t))
    report.unanchored = sorted(n for n in new if state.anchors.get(n) is None)

    new_set = set(new)
    if kb is not None:
        family = [c for c in registry.live() if c.members <= new_set]
        targets = [c for c in registry.live() if not c.members <= new_set]
        sem = semantic_join(registry, family, state.anchors, params.gamma,
                            kb.usable_tables(params.gamma), targets=targets,
                            frontier_cap=params.frontier_cap, degree=kb.graph.degree)
        report.merges += len(sem.merges)

    touched = [c for c in registry.live() if c.members & new_set]
    resolve_clusters(state, kb, touched)
    report.queued = len(state.review) - before
    state.refresh_labels(kb)
    return report


def resolve_state(state: IntegrationState, kb: KnowledgeBase | None = None, beta: float | None = None) -> int:
    if beta is not None and beta != state.params.beta:
        p = state.params
        state.params = IntegrationParams(p.epsilon_t, p.gamma, beta, p.q, p.frontier_cap)
        state.labels.clear()
    n = resolve_clusters(state, kb)
    state.refresh_labels(kb)
    return n


def review_export(state: IntegrationState) -> list[dict]:
    return state.review.export()


def read_decisions(lines: Iterable[str]) -> list[dict]:
    out = []
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {line_no}: {exc.msg}") from None
        if not isinstance(doc, dict) or "id" not in doc:
            raise DataError(f"line {line_no}: decision needs an 'id'")
        out.append(doc)
    return out


def review_import(
    state: IntegrationState,
    decisions: Iterable[Mapping],
    kb: KnowledgeBase | None = None,
) -> ImportReport:
    """Apply verdicts. Accepts merge the pair's clusters; rejects veto the
    pair. Clusters holding either side are then resolved again."""
    registry = state.registry
    report = state.review.apply(decisions)
    touched: set[str] = set()
    for item_id in report.applied:
        item = state.review.items[item_id]
        if item.left not in registry:
            continue
        touched.add(item.left)
        if item.verdict == "accept":
            target = item.cluster if item.cluster in registry else item.right
            if target in registry:
                here, there = registry.locate(item.left), registry.locate(target)
                if here.id != there.id:
                    registry.pair_join(here, there)
                touched.add(target)
        elif item.right in registry:
            touched.add(item.right)
    if touched:
        resolve_clusters(state, kb, [c for c in registry.live() if c.members & touched])
        state.refresh_labels(kb)
    return report


def stats(state: IntegrationState) -> dict:
    live = state.registry.live()
    sizes = Counter(len(c.members) for c in live)
    fronts = [len(c.frontier) for c in live]
    overlaps = sum(1 for i, a in enumerate(live) for b in live[i + 1:] if a.members & b.members)
    shared = sorted(a for a, ids in state.registry.holders.items() if len(ids) > 1)
    return {
        "clusters": len(live),
        "attributes": len(state.registry.attributes()),
        "size_histogram": {str(k): v for k, v in sorted(sizes.items())},
        "frontier": {
            "total": sum(fronts),
            "min": min(fronts, default=0),
            "max": max(fronts, default=0),
            "mean": round(sum(fronts) / len(fronts), 3) if fronts else 0.0,
        },
        "overlapping_pairs": overlaps,
        "shared_attributes": shared,
        "pending_reviews": len(state.review.pending()),
    }
