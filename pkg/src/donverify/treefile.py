"""The published tree file and the donor (truth) file.

Tree file layout::

    {"format_version": 1, "k": 2, "allow_negative": false,
     "nodes": [{"id": 0, "parent": 4, "V": 1, "donor": "d"}, ...]}

Nodes are sorted by id, amounts are integers in minor units, and only
leaves carry a ``"donor"`` key.  Region forests add ``"forest": true``,
which lets the root exceed ``k`` children.  Loaded leaves take their
claimed value as their amount until real amounts are attached with
:func:`donverify.tree.with_truth`.

Donor file layout: ``[{"donor": "d", "amount": 1}, ...]``.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .money import is_money
from .tree import DonationTree, DonorRecord, Node, TreeError

FORMAT_VERSION = 1


class FileFormatError(TreeError):
    pass


def tree_to_dict(tree: DonationTree) -> dict:
    nodes = []
    for nid in sorted(tree.nodes):
        node = tree.nodes[nid]
        entry = {"id": nid, "parent": node.parent, "V": node.claimed}
        if node.is_leaf:
            entry["donor"] = node.donor.donor_id
        nodes.append(entry)
    doc = {"format_version": FORMAT_VERSION, "k": tree.k, "allow_negative": tree.allow_negative}
    if tree.forest:
        doc["forest"] = True
    doc["nodes"] = nodes
    return doc


def dumps_tree(tree: DonationTree) -> str:
    doc = tree_to_dict(tree)
    nodes = doc.pop("nodes")
    head = json.dumps(doc)[:-1]
    if not nodes:
        return head + ', "nodes": []}\n'
    body = ",\n".join("  " + json.dumps(n) for n in nodes)
    return head + ', "nodes": [\n' + body + "\n]}\n"


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise FileFormatError(msg)


def tree_from_dict(doc: object) -> DonationTree:
    _require(isinstance(doc, dict), "tree file must be a JSON object")
    _require(doc.get("format_version") == FORMAT_VERSION, f"unsupported format_version {doc.get('format_version')!r}")
    k = doc.get("k")
    _require(is_money(k) and k >= 2, f"k must be an integer >= 2, got {k!r}")
    allow_negative = doc.get("allow_negative")
    _require(isinstance(allow_negative, bool), "allow_negative must be a boolean")
    forest = doc.get("forest", False)
    _require(isinstance(forest, bool), "forest must be a boolean")
    raw = doc.get("nodes")
    _require(isinstance(raw, list), "nodes must be a list")

    tree = DonationTree(k, allow_negative)
    tree.forest = forest
    prev = None
    for pos, entry in enumerate(raw):
        _require(isinstance(entry, dict), f"nodes[{pos}] is not an object")
        extra = set(entry) - {"id", "parent", "V", "donor"}
        _require(not extra, f"nodes[{pos}] has unknown keys {sorted(extra)}")
        nid, parent, value = entry.get("id"), entry.get("parent"), entry.get("V")
        _require(is_money(nid) and nid >= 0, f"nodes[{pos}]: bad id {nid!r}")
        _require(prev is None or nid > prev, f"nodes[{pos}]: ids must be unique and ascending")
        prev = nid
        _require(parent is None or is_money(parent), f"node {nid}: bad parent {parent!r}")
        _require(is_money(value), f"node {nid}: V must be an integer, got {value!r}")
        donor = None
        if "donor" in entry:
            _require(isinstance(entry["donor"], str), f"node {nid}: donor must be a string")
            donor = DonorRecord(entry["donor"], value)
            _require(donor.donor_id not in tree.donor_index, f"node {nid}: duplicate donor {donor.donor_id!r}")
            tree.donor_index[donor.donor_id] = nid
        tree.nodes[nid] = Node(nid, parent, [], value, donor, 1)

    roots = [n.id for n in tree.nodes.values() if n.parent is None]
    if tree.nodes:
        _require(len(roots) == 1, f"expected exactly one root, found {len(roots)}")
        tree.root = roots[0]
    for node in tree.nodes.values():
        if node.parent is not None:
            _require(node.parent in tree.nodes, f"node {node.id}: parent {node.parent} does not exist")
            _require(node.parent != node.id, f"node {node.id} is its own parent")
            tree.nodes[node.parent].children.append(node.id)  # ids ascend, so lists stay sorted
    for node in tree.nodes.values():
        if node.children:
            _require(not node.is_leaf, f"internal node {node.id} carries a donor payload")
        else:
            _require(node.is_leaf, f"leaf node {node.id} has no donor")
    _fill_sizes(tree)
    tree._next_id = (max(tree.nodes) + 1) if tree.nodes else 0
    try:
        tree.check_structure()
    except FileFormatError:
        raise
    except TreeError as exc:
        raise FileFormatError(str(exc)) from None
    return tree


def _fill_sizes(tree: DonationTree) -> None:
    if tree.root is None:
        return
    order, stack, seen = [], [tree.root], set()
    while stack:
        nid = stack.pop()
        _require(nid not in seen, f"node {nid} reached twice: cycle in parent links")
        seen.add(nid)
        order.append(nid)
        stack.extend(tree.nodes[nid].children)
    _require(len(seen) == len(tree.nodes), "parent links contain a cycle detached from the root")
    for nid in reversed(order):
        node = tree.nodes[nid]
        if node.children:
            node.size = sum(tree.nodes[c].size for c in node.children)
            node.height = 1 + max(tree.nodes[c].height for c in node.children)


def loads_tree(text: str) -> DonationTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"invalid JSON: {exc}") from None
    return tree_from_dict(doc)


def write_tree(tree: DonationTree, path: str | Path) -> None:
    Path(path).write_text(dumps_tree(tree), encoding="utf-8")


def read_tree(path: str | Path) -> DonationTree:
    return loads_tree(Path(path).read_text(encoding="utf-8"))


# ---- donor files ---------------------------------------------------------------


def dumps_donors(records: Sequence[DonorRecord]) -> str:
    body = ",\n".join("  " + json.dumps({"donor": r.donor_id, "amount": r.amount}) for r in records)
    return "[\n" + body + "\n]\n" if records else "[]\n"


def loads_donors(text: str) -> list[DonorRecord]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"invalid JSON: {exc}") from None
    _require(isinstance(doc, list), "donor file must be a JSON list")
    out = []
    for pos, entry in enumerate(doc):
        ok = (
            isinstance(entry, dict)
            and set(entry) == {"donor", "amount"}
            and isinstance(entry["donor"], str)
            and is_money(entry["amount"])
        )
        _require(ok, f"record {pos} is malformed: {json.dumps(entry)[:80]}")
        out.append(DonorRecord(entry["donor"], entry["amount"]))
    return out


def write_donors(records: Sequence[DonorRecord], path: str | Path) -> None:
    Path(path).write_text(dumps_donors(records), encoding="utf-8")


def read_donors(path: str | Path) -> list[DonorRecord]:
    return loads_donors(Path(path).read_text(encoding="utf-8"))
