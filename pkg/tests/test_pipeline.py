import json

import pytest

from conftest import graph_from_edges
from schemajoin.errors import DataError, ParameterError, StateCorruption
from schemajoin.normalize import Dictionaries
from schemajoin.pipeline import (
    Attribute,
    IntegrationParams,
    IntegrationState,
    KnowledgeBase,
    Schema,
    batch_integrate,
    incremental_integrate,
    read_schemas,
    resolve_state,
    review_export,
    review_import,
    stats,
)
from test_resolve import HOUSE_EDGES


def schema(sid, *names, values=None):
    values = values or {}
    return Schema(sid, sid, [Attribute(n, values.get(n, [])) for n in names])


@pytest.fixture(scope="module")
def house_kb():
    return KnowledgeBase.build(graph_from_edges(HOUSE_EDGES), (1, 2))


HOUSE = IntegrationParams(epsilon_t=1, gamma=2, beta=1.5)


def test_read_schemas():
    docs = [
        '{"id": 1, "name": "a", "attributes": ["x", {"name": "y", "values": [1, "2"]}]}',
        "",
        '{"id": "2", "attributes": []}',
    ]
    s = read_schemas(docs)
    assert [x.id for x in s] == ["1", "2"]
    assert s[0].attributes[1].values == ["1", "2"]


@pytest.mark.parametrize("line", [
    "{not json",
    '{"name": "no id"}',
    '{"id": 1, "attributes": [{"name": ""}]}',
    '{"id": 1, "attributes": [{"name": "x", "values": "abc"}]}',
    '{"id": 1, "attributes": [3]}',
])
def test_read_schemas_rejects(line):
    with pytest.raises(DataError, match="line 1"):
        read_schemas([line])


def test_duplicate_schema_ids():
    with pytest.raises(DataError, match="duplicate"):
        read_schemas(['{"id": 1}', '{"id": 1}'])


@pytest.mark.parametrize("kw", [{"epsilon_t": -1}, {"gamma": 0}, {"beta": 1}, {"q": 0}, {"frontier_cap": -1}])
def test_params_validation(kw):
    with pytest.raises(ParameterError):
        IntegrationParams(**kw)


def test_empty_corpus():
    state, report = batch_integrate([], IntegrationParams())
    assert len(state.registry) == 0 and report.added == []
    assert json.loads(state.dumps())["clusters"] == []


def test_without_anchors_equals_literal_clustering():
    schemas = [schema("a", "word", "import", "name"), schema("b", "work", "export", "nabe", "zzz")]
    state, _ = batch_integrate(schemas, IntegrationParams(), None)
    assert state.registry.partition() == {
        frozenset({"word", "work"}), frozenset({"name", "nabe"}),
        frozenset({"import"}), frozenset({"export"}), frozenset({"zzz"})}


def test_house_batch(house_kb):
    s = schema("s", "building", "house", "home", "family")
    state, report = batch_integrate([s], HOUSE, house_kb)
    assert state.registry.partition() == {
        frozenset({"building", "home", "house"}), frozenset({"family", "home", "house"})}
    st = stats(state)
    assert st["clusters"] == 2 and st["overlapping_pairs"] == 1
    assert st["shared_attributes"] == ["home", "house"]
    assert report.queued == 4 and st["pending_reviews"] == 4


def test_batch_coverage_and_errors(pie_kb):
    schemas = [schema("a", "Blackberry pie", "--", "Tiropita"), schema("b", "Strawbery pie", "Colour")]
    state, report = batch_integrate(schemas, IntegrationParams(gamma=2), pie_kb)
    assert state.registry.attributes() == {"Blackberry pie", "--", "Tiropita", "Strawbery pie", "Colour"}
    assert list(report.normalization_errors) == ["a"]
    assert state.anchors["Strawbery pie"] == "Strawberry pie"
    assert frozenset({"Blackberry pie", "Strawbery pie"}) in state.registry.partition()


def test_distance_contract(pie_kb):
    schemas = [schema("a", "Blackberry pie", "Key lime pie", "Tiropita", "pie"),
               schema("b", "Strawberry pie", "Sweet pies", "Savoury pies", "colour", "color")]
    state, _ = batch_integrate(schemas, IntegrationParams(gamma=3), pie_kb)
    policy = state.policy(pie_kb)
    for c in state.registry.live():
        rep = state.labels[c.key()]
        assert rep in c.members
        assert all(policy.compatible(rep, m) for m in c.members if m != rep)


def test_incremental_into_empty(pie_kb):
    state = IntegrationState(IntegrationParams(gamma=2))
    incremental_integrate(schema("a", "Tiropita", "Unrelated thing"), state, pie_kb)
    assert state.registry.partition() == {frozenset({"Tiropita"}), frozenset({"Unrelated thing"})}
    assert state.registry.locate("Tiropita").frontier == {"Tiropita": 0, "Savoury pies": 1}
    assert state.registry.locate("Unrelated thing").frontier == {}


def test_incremental_literal_match_keeps_size(pie_kb):
    state, _ = batch_integrate([schema("a", "colour", "Tiropita")], IntegrationParams(), pie_kb)
    n = len(state.registry)
    report = incremental_integrate(schema("b", "color"), state, pie_kb)
    assert len(state.registry) == n and report.merges == 1
    assert state.registry.locate("color").members == {"color", "colour"}


def test_incremental_frontier_match(pie_kb):
    state = IntegrationState(IntegrationParams(gamma=2))
    incremental_integrate(schema("a", "Tiropita"), state, pie_kb)
    # one edit from the frontier concept at distance 0
    incremental_integrate(schema("b", "Savory pies"), state, pie_kb)
    assert state.registry.locate("Savory pies").members == {"Savory pies", "Tiropita"}


def test_incremental_value_conflict_is_queued(pie_kb):
    state, _ = batch_integrate([schema("a", "amount", values={"amount": ["1", "2", "3"]})], IntegrationParams(), pie_kb)
    report = incremental_integrate(schema("b", "amount2", values={"amount2": ["abc", "def"]}), state, pie_kb)
    assert report.queued == 1
    assert len(state.registry) == 2
    [item] = review_export(state)
    assert {item["left"], item["right"]} == {"amount", "amount2"}

    review_import(state, [{"id": item["id"], "verdict": "accept"}], pie_kb)
    assert state.registry.locate("amount").members == {"amount", "amount2"}


def test_reinsert_is_a_noop(pie_kb):
    schemas = [schema("a", "Blackberry pie", "Key lime pie"), schema("b", "Tiropita", "colour")]
    state, _ = batch_integrate(schemas, IntegrationParams(gamma=2), pie_kb)
    before = state.dumps()
    for s in schemas:
        report = incremental_integrate(s, state, pie_kb)
        assert report.added == [] and report.merges == 0
    assert state.dumps() == before


def test_reject_is_permanent(house_kb):
    s = schema("s", "building", "house", "home", "family")
    state, _ = batch_integrate([s], HOUSE, house_kb)
    item = next(i for i in review_export(state) if {i["left"], i["right"]} == {"home", "family"})
    review_import(state, [{"id": item["id"], "verdict": "reject"}], house_kb)
    for c in state.registry.live():
        assert not {"home", "family"} <= c.members
    incremental_integrate(schema("t", "homes", "families"), state, house_kb)
    resolve_state(state, house_kb)
    for c in state.registry.live():
        assert not {"home", "family"} <= c.members
    assert set().union(*state.registry.partition()) >= {"building", "house", "home", "family"}


def test_roundtrip_without_edits(house_kb):
    state, _ = batch_integrate([schema("s", "building", "house", "home", "family")], HOUSE, house_kb)
    before = state.dumps()
    review_import(state, review_export(state), house_kb)
    assert state.dumps() == before
    review_import(state, [], house_kb)
    assert state.dumps() == before


def test_state_roundtrip(tmp_path, pie_kb):
    state, _ = batch_integrate([schema("a", "Blackberry pie", "Strawbery pie", "Price",
                                       values={"Price": ["$1", "$2"]})], IntegrationParams(gamma=2), pie_kb)
    path = tmp_path / "state.json"
    state.save(path)
    loaded = IntegrationState.load(path)
    assert loaded.dumps() == path.read_text(encoding="utf-8")
    assert loaded.registry.partition() == state.registry.partition()
    assert loaded.values == {"Price": ["$1", "$2"]}


@pytest.mark.parametrize("text", [
    "not json",
    "[]",
    '{"format": "other", "version": 1}',
    '{"format": "schemajoin-state", "version": 1, "params": {"gamma": 0}}',
    '{"format": "schemajoin-state", "version": 1, "params": {}, "clusters": [{"attributes": []}]}',
])
def test_corrupt_state(tmp_path, text):
    path = tmp_path / "s.json"
    path.write_text(text)
    with pytest.raises(StateCorruption):
        IntegrationState.load(path)


def test_kb_roundtrip(tmp_path, pie_kb):
    pie_kb.save(tmp_path / "kb")
    again = KnowledgeBase.load(tmp_path / "kb")
    assert again.tables == pie_kb.tables
    assert sorted(again.graph.edge_records()) == sorted(pie_kb.graph.edge_records())
    (tmp_path / "kb" / "meta.json").write_text('{"tables": [1], "concepts": 3, "edges": 1}')
    with pytest.raises(StateCorruption):
        KnowledgeBase.load(tmp_path / "kb")
    with pytest.raises(FileNotFoundError):
        KnowledgeBase.load(tmp_path / "nothing")


def test_kb_needs_h1(pie_kb):
    with pytest.raises(ParameterError):
        KnowledgeBase(pie_kb.graph, {2: pie_kb.tables[2]})


def test_dictionaries_feed_anchoring(pie_kb):
    d = Dictionaries(abbrevs={"strw": "strawberry"})
    state, _ = batch_integrate([schema("a", "Strw_Pie")], IntegrationParams(), pie_kb, d)
    assert state.anchors["Strw_Pie"] == "Strawberry pie"
