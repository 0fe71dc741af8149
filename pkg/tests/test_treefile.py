import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import records
from donverify.tree import DonorRecord, build_region_forest, build_tree, with_truth
from donverify.treefile import (
    FileFormatError,
    dumps_donors,
    dumps_tree,
    loads_donors,
    loads_tree,
    read_donors,
    read_tree,
    tree_to_dict,
    write_donors,
    write_tree,
)


def test_example_tree_file(honest):
    doc = tree_to_dict(honest)
    assert doc["k"] == 2 and doc["allow_negative"] is False and "forest" not in doc
    assert doc["nodes"][0] == {"id": 0, "parent": 4, "V": 1, "donor": "d"}
    assert doc["nodes"][-1] == {"id": 6, "parent": None, "V": 100}
    text = dumps_tree(honest)
    assert text.count("\n") == len(doc["nodes"]) + 2  # one node per line
    assert json.loads(text) == doc


def test_round_trip_files(tmp_path, tampered):
    write_tree(tampered, tmp_path / "t.json")
    back = read_tree(tmp_path / "t.json")
    assert dumps_tree(back) == dumps_tree(tampered)
    back.check_structure()
    assert back.depth() == tampered.depth()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-50, 500), min_size=1, max_size=60), st.integers(2, 6))
def test_round_trip_random(amounts, k):
    tree = build_tree(records(amounts), k, allow_negative=True)
    back = loads_tree(dumps_tree(tree))
    assert dumps_tree(back) == dumps_tree(tree)
    assert back == tree


def test_forest_round_trip():
    f = build_region_forest(records([1, 3, 5, 9, 17, 33]), [1, 2, 4, 8, 16, 32, 64], 2)
    back = loads_tree(dumps_tree(f))
    assert back.forest and tree_to_dict(back)["forest"] is True
    assert dumps_tree(back) == dumps_tree(f)


def test_loaded_leaves_take_claims_until_truth_attached(tampered):
    back = loads_tree(dumps_tree(tampered))
    truth = [DonorRecord("d", 1), DonorRecord("e", 5), DonorRecord("f", 10), DonorRecord("g", 84)]
    merged, omitted = with_truth(back, truth)
    assert not omitted
    assert merged.leaf_of("g").donor.amount == 84


def test_empty_tree_round_trip():
    t = build_tree([DonorRecord("x", 1)], 2).delete("x")
    back = loads_tree(dumps_tree(t))
    assert back.root is None and not back.nodes


def _doc(honest):
    return json.loads(dumps_tree(honest))


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.update(format_version=2), "format_version"),
    (lambda d: d.update(k=1), "k must be"),
    (lambda d: d.update(k=True), "k must be"),
    (lambda d: d.update(allow_negative="no"), "allow_negative"),
    (lambda d: d.update(nodes={}), "nodes must be a list"),
    (lambda d: d["nodes"][0].update(extra=1), "unknown keys"),
    (lambda d: d["nodes"][0].update(V=1.5), "V must be an integer"),
    (lambda d: d["nodes"].reverse(), "ascending"),
    (lambda d: d["nodes"][1].update(id=0), "ascending"),
    (lambda d: d["nodes"][4].update(parent=None), "exactly one root"),
    (lambda d: d["nodes"][0].update(parent=17), "does not exist"),
    (lambda d: d["nodes"][4].update(donor="zz"), "carries a donor"),
    (lambda d: d["nodes"][0].pop("donor"), "has no donor"),
    (lambda d: d["nodes"][1].update(donor="d"), "duplicate donor"),
])
def test_rejects_malformed(honest, mutate, message):
    doc = _doc(honest)
    mutate(doc)
    with pytest.raises(FileFormatError, match=message):
        loads_tree(json.dumps(doc))


def test_negative_claims_load_for_auditing(honest):
    # a cheating file must still load so its checks can fail
    doc = _doc(honest)
    doc["nodes"][4]["V"] = -6
    tree = loads_tree(json.dumps(doc))
    assert tree.claimed(4) == -6


def test_rejects_cycle(honest):
    doc = _doc(honest)
    # b and c point at each other, a stays root with no children
    doc["nodes"][4]["parent"] = 5
    doc["nodes"][5]["parent"] = 4
    with pytest.raises(FileFormatError):
        loads_tree(json.dumps(doc))


def test_rejects_bad_json():
    with pytest.raises(FileFormatError, match="invalid JSON"):
        loads_tree("{nope")
    with pytest.raises(FileFormatError, match="JSON object"):
        loads_tree("[]")


def test_donor_file_round_trip(tmp_path, donations):
    write_donors(donations, tmp_path / "d.json")
    assert read_donors(tmp_path / "d.json") == donations
    assert loads_donors(dumps_donors([])) == []


@pytest.mark.parametrize("text, where", [
    ('[{"donor": "a", "amount": 1}, {"donor": "b", "amount": 1.5}]', "record 1"),
    ('[{"donor": "a"}]', "record 0"),
    ('[{"donor": 3, "amount": 1}]', "record 0"),
    ('{"donor": "a", "amount": 1}', "JSON list"),
])
def test_donor_file_rejects(text, where):
    with pytest.raises(FileFormatError, match=where):
        loads_donors(text)
