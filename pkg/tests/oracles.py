"""Test-only oracles that work from the serialized file, not the tree object."""
import itertools

from donverify.treefile import tree_to_dict


def naive_error_leaves(tree, truth):
    """Walk every leaf's path using only the flat node list of the file."""
    doc = tree_to_dict(tree)
    V = {n["id"]: n["V"] for n in doc["nodes"]}
    parent = {n["id"]: n["parent"] for n in doc["nodes"]}
    kids = {}
    for n in doc["nodes"]:
        if n["parent"] is not None:
            kids.setdefault(n["parent"], []).append(n["id"])
    out = set()
    for n in doc["nodes"]:
        if "donor" not in n:
            continue
        bad = V[n["id"]] != truth[n["donor"]]
        cur = parent[n["id"]]
        while cur is not None:
            bad |= V[cur] != sum(V[c] for c in kids[cur])
            cur = parent[cur]
        if bad:
            out.add(n["donor"])
    return out


def naive_sums(tree):
    """Ground truth per node id by summing leaves found through parent links."""
    doc = tree_to_dict(tree)
    parent = {n["id"]: n["parent"] for n in doc["nodes"]}
    sums = {n["id"]: 0 for n in doc["nodes"]}
    for n in doc["nodes"]:
        if "donor" in n:
            amount = tree.leaf_of(n["donor"]).donor.amount
            cur = n["id"]
            while cur is not None:
                sums[cur] += amount
                cur = parent[cur]
    return sums


def enumerate_detection(tree, truth, prob):
    """Detection probability by summing over every verifier subset (small n only)."""
    from donverify.tree import verify_donor_path

    donors = list(truth)
    total = 0.0
    for picks in itertools.product((False, True), repeat=len(donors)):
        weight = 1.0
        for r, picked in zip(donors, picks):
            p = prob(r)
            weight *= p if picked else 1 - p
        if weight == 0:
            continue
        caught = False
        for r, picked in zip(donors, picks):
            if not picked:
                continue
            if r.donor_id not in tree.donor_index or verify_donor_path(tree, r.donor_id, r.amount).is_error:
                caught = True
                break
        total += weight * caught
    return total
