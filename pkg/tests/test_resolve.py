import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graph_from_edges, random_edges
from schemajoin.errors import ParameterError
from schemajoin.resolve import (
    Candidate,
    DistancePolicy,
    ResolveConfig,
    ReviewItem,
    ReviewQueue,
    dominant_affixes,
    infer_type,
    review_id,
    split_members,
    value_verify,
    verify,
    violating_pairs,
)

HOUSE_EDGES = [("building", "x"), ("x", "house"), ("house", "home"), ("home", "y"), ("y", "family")]


def house_policy(**kw):
    g = graph_from_edges(HOUSE_EDGES)
    anchors = {a: a for a in ("building", "house", "home", "family")}
    return DistancePolicy(ResolveConfig(beta=1.5, gamma=2, epsilon_t=1), g, anchors, **kw)


def test_house_fixture_splits_in_two():
    parts = split_members({"house", "home", "building", "family"}, house_policy())
    assert parts == [frozenset({"building", "home", "house"}), frozenset({"family", "home", "house"})]


def test_house_fixture_bridges_reported():
    seen = []
    split_members({"house", "home", "building", "family"}, house_policy(),
                  lambda x, a, b: seen.append((x, frozenset((a, b)))))
    assert sorted(x for x, _ in seen) == ["home", "house"]
    assert {p for _, p in seen} == {frozenset({"building", "family"})}


def test_closed_cluster_unchanged():
    assert split_members({"house", "home", "building"}, house_policy()) == [
        frozenset({"building", "home", "house"})]


def test_veto_separates_pair():
    policy = house_policy(vetoes=[("house", "home")])
    for part in split_members({"house", "home"}, policy):
        assert not {"house", "home"} <= part


def test_accept_overrides_distance():
    policy = house_policy(accepted=[("building", "family")])
    assert policy.ratio("building", "family") == 0
    assert len(split_members({"house", "home", "building", "family"}, policy)) == 1


def test_literal_only_members():
    policy = DistancePolicy(ResolveConfig(epsilon_t=1))
    parts = split_members({"aaaa", "aaab", "aabb"}, policy)
    assert parts == [frozenset({"aaaa", "aaab"}), frozenset({"aaab", "aabb"})]
    assert policy.semantic("aaaa", "aaab") is None


def test_config_validation():
    with pytest.raises(ParameterError):
        ResolveConfig(beta=1.0)
    with pytest.raises(ParameterError):
        ResolveConfig(gamma=0)
    with pytest.raises(ParameterError):
        ResolveConfig(epsilon_t=-1)
    assert ResolveConfig(beta=1.5, gamma=3).tolerance == 4.5


@pytest.mark.parametrize("sample,kind", [
    ("12", "integer"), ("-3", "integer"), ("4.5", "decimal"), (".5", "decimal"),
    ("2016-01-02", "date"), ("Jul-10", "date"), ("03/04/2015", "date"),
    ("a,b,c", "list"), ("x; y", "list"), ("abc", "string"), ("$12", "string"),
])
def test_infer_type(sample, kind):
    assert infer_type(sample) == kind


def test_affixes():
    assert dominant_affixes(["$12", "$9", "$40"]) == ("$", None)
    assert dominant_affixes(["12%", "9%"]) == (None, "%")
    assert dominant_affixes(["$1", "2", "3"]) == (None, None)


def test_value_rules():
    assert value_verify(["$12", "$9"], ["$40"]).passed
    assert value_verify(["$12", "$9"], ["$40"]).rule == "affix"
    check = value_verify(["1", "2"], ["abc"])
    assert not check.passed and check.rule == "type"
    assert value_verify(["1"], ["2.5"]).passed
    assert not value_verify(["$1", "$2"], ["€1", "€2"]).passed
    empty = value_verify([], ["x"])
    assert empty.passed and not empty.applicable


def test_verify_routes_candidates():
    queue = ReviewQueue()
    values = {"n1": ["1", "2"], "s1": ["abc"], "n2": ["3"]}
    cands = [Candidate("a", "b", "member"), Candidate("n1", "s1", "member"), Candidate("n1", "n2", "member")]
    confirmed = verify(cands, values, queue)
    assert [(c.left, c.right) for c in confirmed] == [("a", "b"), ("n1", "n2")]
    assert [(i.left, i.right, i.reason) for i in queue.pending()] == [("n1", "s1", "type rule failed")]

    item = queue.pending()[0]
    queue.apply([{"id": item.id, "verdict": "accept"}])
    assert [(c.left, c.right) for c in verify(cands[1:2], values, queue)] == [("n1", "s1")]

    queue2 = ReviewQueue([ReviewItem(review_id("a", "b"), "a", "b", "a", 0, None, verdict="reject")])
    assert verify(cands[:1], {}, queue2) == []


def test_review_transitions():
    queue = ReviewQueue()
    item = queue.add(ReviewItem(review_id("p", "q"), "p", "q", "p", 1, 2))
    assert queue.export() == [item.to_doc()]
    report = queue.apply([{"id": item.id, "verdict": "reject"}, {"id": "nope", "verdict": "accept"}])
    assert report.applied == [item.id] and report.unknown == ["nope"]
    report = queue.apply([{"id": item.id, "verdict": "accept"}])
    assert report.invalid == [item.id] and item.verdict == "reject"
    # re-adding a decided pair keeps the verdict
    assert queue.add(ReviewItem(item.id, "p", "q", "p", 1, 2)).verdict == "reject"
    assert queue.export() == []


def test_review_bad_verdict():
    queue = ReviewQueue([ReviewItem("i", "a", "b", "a", 1, None)])
    assert queue.apply([{"id": "i", "verdict": "maybe"}]).invalid == ["i"]
    assert queue.apply([{"id": "i", "verdict": "pending"}]).applied == []


def test_review_id_is_order_free():
    assert review_id("a", "b") == review_id("b", "a") != review_id("a", "c")


def random_case(seed):
    rng = random.Random(seed)
    n = rng.randrange(20, 60)
    edges = random_edges(rng, n, rng.randrange(n, 2 * n))
    g = graph_from_edges(edges)
    concepts = sorted(g.concepts)
    members, anchors = set(), {}
    for i in range(rng.randrange(2, 14)):
        name = "".join(rng.choice("abc") for _ in range(rng.randrange(3, 6))) + str(i % 3)
        members.add(name)
        if rng.random() < 0.8:
            anchors[name] = rng.choice(concepts)
    cfg = ResolveConfig(beta=rng.choice([1.2, 1.5, 2.0]), gamma=rng.randrange(1, 4), epsilon_t=rng.randrange(0, 3))
    vetoes = []
    ordered = sorted(members)
    if len(ordered) > 2 and rng.random() < 0.3:
        vetoes.append((ordered[0], ordered[1]))
    return members, DistancePolicy(cfg, g, anchors, vetoes=vetoes)


def check_resolved(members, policy, parts):
    assert set().union(*parts) == members
    for p in parts:
        assert violating_pairs(p, policy) == []
        assert not any(p < q for q in parts)
    counts = {}
    for p in parts:
        for x in p:
            counts[x] = counts.get(x, 0) + 1
    for x, k in counts.items():
        if k > 1:
            for p in parts:
                if x in p:
                    assert all(policy.ratio(x, y) <= 1 for y in p if y != x)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_randomized_postconditions(seed):
    members, policy = random_case(seed)
    check_resolved(members, policy, split_members(members, policy))


def test_ratio_semantics():
    policy = house_policy()
    assert policy.ratio("building", "house") == pytest.approx(2 / 3)
    # beyond the semantic horizon only the literal distance is left
    assert policy.ratio("building", "family") == 7
    assert policy.semantic("building", "family") is None
