import pytest
from hypothesis import given
from hypothesis import strategies as st

from schemajoin.cluster import ClusterRegistry, merge_frontiers
from schemajoin.errors import NotFound


def test_pair_join_merges_frontiers_by_minimum():
    reg = ClusterRegistry()
    a = reg.add(["x"], {"c1": 2, "c2": 1})
    b = reg.add(["y"], {"c1": 1, "c3": 3})
    u = reg.pair_join(a, b)
    assert u.members == {"x", "y"}
    assert u.frontier == {"c1": 1, "c2": 1, "c3": 3}
    assert len(reg) == 1 and reg.locate("x") is u


def test_self_join_is_a_counted_noop():
    reg = ClusterRegistry()
    a = reg.singleton("x")
    assert reg.pair_join(a, a) is a
    assert reg.self_joins == 1 and len(reg) == 1


def test_locate_missing():
    with pytest.raises(NotFound):
        ClusterRegistry().locate("nope")


def test_empty_cluster_rejected():
    with pytest.raises(ValueError):
        ClusterRegistry().add([])


def test_overlap_locates_lowest_id():
    reg = ClusterRegistry()
    a = reg.add(["x", "y"])
    reg.add(["y", "z"])
    assert reg.locate("y") is a
    assert not reg.is_partition()


def test_doc_is_sorted():
    reg = ClusterRegistry()
    c = reg.add(["b", "a"], {"z": 1, "m": 0})
    assert c.to_doc() == {"attributes": ["a", "b"],
                          "frontier": [{"concept": "m", "distance": 0}, {"concept": "z", "distance": 1}]}


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=30))
def test_joins_keep_a_partition(pairs):
    reg = ClusterRegistry()
    for i in range(10):
        reg.singleton(f"a{i}")
    for i, j in pairs:
        reg.join_attributes(f"a{i}", f"a{j}")
        assert reg.is_partition()
        assert set().union(*reg.partition()) == {f"a{i}" for i in range(10)}


@given(st.dictionaries(st.sampled_from("abcde"), st.integers(0, 5)),
       st.dictionaries(st.sampled_from("abcde"), st.integers(0, 5)))
def test_merge_frontiers(a, b):
    m = merge_frontiers(a, b)
    assert set(m) == set(a) | set(b)
    for k, v in m.items():
        assert v == min(x for x in (a.get(k), b.get(k)) if x is not None)
