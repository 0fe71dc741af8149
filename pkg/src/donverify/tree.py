"""Donation trees: k-ary summation trees over donor leaves.

Each node carries the collector's claimed value ``V``.  Leaves also carry
the donor's record, whose ``amount`` is the ground truth ``D`` for that
leaf; the ground truth of an internal node is the sum over its leaves and
is always recomputed, never stored.

Node ids
    Assigned in construction order: leaves ``0..n-1`` in input order, then
    internal nodes in post-order (children before parents), so the root of
    a freshly built tree holds the largest id.  Nodes created later by
    :meth:`DonationTree.insert` take the next unused id; ids of removed
    nodes are never reused.  Child lists are kept sorted by id.

Balance
    Every internal node whose subtree holds ``s`` leaves has
    ``min(k, s)`` children whose leaf counts differ by at most one.  Inserts
    descend into the smallest child and deletes remove the leaf at the end of
    the largest-child path (swapping it into the deleted donor's slot), which
    preserves that shape.  Consequently the depth never exceeds
    ``ceil(log2(n)) + DEPTH_SLACK`` with ``DEPTH_SLACK = 0``, and one insert or
    delete writes at most ``TOUCH_FACTOR * depth + TOUCH_EXTRA`` nodes.

Empty tree
    A tree whose last donor was deleted has ``root is None`` and no nodes.
"""
from __future__ import annotations

import math
from bisect import insort
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .intervals import check_boundaries, region_index
from .money import Money, is_money

DEPTH_SLACK = 0
TOUCH_FACTOR = 2
TOUCH_EXTRA = 4


class TreeError(ValueError):
    """Structural or precondition violation on a donation tree."""


class DuplicateDonorError(TreeError):
    pass


class UnknownDonorError(TreeError, KeyError):
    def __str__(self) -> str:
        return f"unknown donor {self.args[0]!r}"


class UnknownNodeError(TreeError, KeyError):
    def __str__(self) -> str:
        return f"unknown node {self.args[0]!r}"


@dataclass(frozen=True)
class DonorRecord:
    donor_id: str
    amount: Money


@dataclass
class Node:
    id: int
    parent: int | None
    children: list[int]
    claimed: Money
    donor: DonorRecord | None = None
    size: int = 1  # leaves in this subtree
    height: int = 0  # longest downward path to a leaf

    @property
    def is_leaf(self) -> bool:
        return self.donor is not None


@dataclass(frozen=True)
class NodeCheck:
    node_id: int
    claimed: Money
    children_sum: Money

    @property
    def ok(self) -> bool:
        return self.claimed == self.children_sum

    @property
    def kind(self) -> str:
        if self.claimed < self.children_sum:
            return "under-claim"
        if self.claimed > self.children_sum:
            return "over-claim"
        return "ok"


@dataclass(frozen=True)
class PathReport:
    """Outcome of one donor running the path check against a published tree."""

    donor_id: str
    claimed_donation: Money
    leaf_claim: Money
    node_checks: tuple[NodeCheck, ...]
    steps: int

    @property
    def leaf_ok(self) -> bool:
        return self.leaf_claim == self.claimed_donation

    @property
    def is_error(self) -> bool:
        return not (self.leaf_ok and all(c.ok for c in self.node_checks))

    def failures(self) -> list[str]:
        kinds = [] if self.leaf_ok else ["leaf-mismatch"]
        kinds.extend(c.kind for c in self.node_checks if not c.ok)
        return kinds


def _validate_record(record: DonorRecord, allow_negative: bool) -> None:
    if not isinstance(record, DonorRecord):
        raise TreeError(f"expected DonorRecord, got {type(record).__name__}")
    if not is_money(record.amount):
        raise TreeError(f"donor {record.donor_id!r}: amount must be an integer number of minor units")
    if not allow_negative and record.amount < 1:
        raise TreeError(
            f"donor {record.donor_id!r}: amount {record.amount} below 1 minor unit "
            "(negative donations are disabled)"
        )


class DonationTree:
    """A donation tree with claimed values and a donor index.

    The mutating methods (:meth:`insert`, :meth:`delete`, :meth:`set_claim`)
    edit the tree in place; the module-level functions of the same purpose
    work on a copy.  A single writer is assumed.
    """

    def __init__(self, k: int, allow_negative: bool = False):
        if not isinstance(k, int) or k < 2:
            raise TreeError(f"arity k must be an integer >= 2, got {k!r}")
        self.k = k
        self.allow_negative = allow_negative
        self.nodes: dict[int, Node] = {}
        self.donor_index: dict[str, int] = {}
        self.root: int | None = None
        # True when the root links per-region subtrees and may exceed k children
        self.forest = False
        self.touched = 0
        self._next_id = 0

    # ---- basic access -------------------------------------------------

    def __len__(self) -> int:
        return len(self.donor_index)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DonationTree):
            return NotImplemented
        return (
            self.k == other.k
            and self.allow_negative == other.allow_negative
            and self.forest == other.forest
            and self.root == other.root
            and self.nodes == other.nodes
            and self.donor_index == other.donor_index
        )

    def __repr__(self) -> str:
        return f"DonationTree(k={self.k}, donors={len(self)}, nodes={len(self.nodes)}, root={self.root})"

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def leaf_of(self, donor_id: str) -> Node:
        try:
            return self.nodes[self.donor_index[donor_id]]
        except KeyError:
            raise UnknownDonorError(donor_id) from None

    def claimed(self, node_id: int) -> Money:
        return self.node(node_id).claimed

    def children_sum(self, node_id: int) -> Money:
        return sum(self.nodes[c].claimed for c in self.node(node_id).children)

    def ancestors(self, node_id: int) -> Iterator[int]:
        """Ids from ``node_id``'s parent up to the root."""
        parent = self.node(node_id).parent
        while parent is not None:
            yield parent
            parent = self.nodes[parent].parent

    def depth_of(self, node_id: int) -> int:
        return sum(1 for _ in self.ancestors(node_id))

    def depth(self) -> int:
        """Length of the longest leaf-to-root path (0 for one leaf or empty)."""
        return 0 if self.root is None else self.nodes[self.root].height

    def depth_bound(self) -> int:
        n = len(self)
        return (math.ceil(math.log2(n)) if n > 1 else 0) + DEPTH_SLACK

    def leaves(self) -> list[DonorRecord]:
        return [self.nodes[i].donor for i in sorted(self.donor_index.values())]

    def copy(self) -> DonationTree:
        out = DonationTree(self.k, self.allow_negative)
        out.nodes = {
            i: Node(n.id, n.parent, list(n.children), n.claimed, n.donor, n.size, n.height)
            for i, n in self.nodes.items()
        }
        out.donor_index = dict(self.donor_index)
        out.root = self.root
        out.forest = self.forest
        out._next_id = self._next_id
        return out

    # ---- construction helpers -----------------------------------------

    def _new_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    def _add_leaf(self, record: DonorRecord, parent: int | None = None) -> int:
        nid = self._new_id()
        self.nodes[nid] = Node(nid, parent, [], record.amount, record, 1)
        self.donor_index[record.donor_id] = nid
        return nid

    def _add_internal(self, children: Sequence[int], parent: int | None = None) -> int:
        nid = self._new_id()
        kids = sorted(children)
        for c in kids:
            self.nodes[c].parent = nid
        self.nodes[nid] = Node(
            nid,
            parent,
            kids,
            sum(self.nodes[c].claimed for c in kids),
            None,
            sum(self.nodes[c].size for c in kids),
            1 + max(self.nodes[c].height for c in kids),
        )
        return nid

    def _build_group(self, leaf_ids: Sequence[int]) -> int:
        """Divide and conquer: ``min(k, n)`` near-equal parts, larger parts first."""
        n = len(leaf_ids)
        if n == 1:
            return leaf_ids[0]
        parts = min(self.k, n)
        q, r = divmod(n, parts)
        kids, start = [], 0
        for j in range(parts):
            stop = start + q + (1 if j < r else 0)
            kids.append(self._build_group(leaf_ids[start:stop]))
            start = stop
        return self._add_internal(kids)

    def _replace_child(self, parent: int | None, old: int, new: int) -> None:
        self.nodes[new].parent = parent
        if parent is None:
            self.root = new
            return
        kids = self.nodes[parent].children
        kids.remove(old)
        insort(kids, new)

    def _adjust_up(self, start: int | None, dv: Money, ds: int) -> int:
        """Add ``dv`` to claims and ``ds`` to sizes from ``start`` to the root; refresh heights."""
        count = 0
        nid = start
        while nid is not None:
            node = self.nodes[nid]
            node.claimed += dv
            node.size += ds
            node.height = 1 + max(self.nodes[c].height for c in node.children)
            count += 1
            nid = node.parent
        return count

    def _check_editable(self) -> None:
        if self.forest:
            raise TreeError("region forests are rebuilt from donations, not edited in place")

    # ---- maintenance ----------------------------------------------------

    def insert(self, record: DonorRecord) -> DonationTree:
        """Add a donor leaf and raise every ancestor's claim by its amount."""
        self._check_editable()
        _validate_record(record, self.allow_negative)
        if record.donor_id in self.donor_index:
            raise DuplicateDonorError(f"duplicate donor {record.donor_id!r}")
        leaf = self._add_leaf(record)
        if self.root is None:
            self.root = leaf
            self.touched = 1
            return self
        nid = self.root
        while True:
            node = self.nodes[nid]
            if node.is_leaf:
                # only reachable when the root itself is a leaf
                self.root = self._add_internal([nid, leaf])
                self.touched = 3
                return self
            if len(node.children) < self.k:
                self.nodes[leaf].parent = nid
                insort(node.children, leaf)
                self.touched = 1 + self._adjust_up(nid, record.amount, 1)
                return self
            smallest = min(node.children, key=lambda c: self.nodes[c].size)
            if self.nodes[smallest].is_leaf:
                pair = self._add_internal([smallest, leaf], parent=nid)
                node.children.remove(smallest)
                insort(node.children, pair)
                self.touched = 3 + self._adjust_up(nid, record.amount, 1)
                return self
            nid = smallest

    def _last_leaf(self) -> int:
        nid = self.root
        while not self.nodes[nid].is_leaf:
            kids = self.nodes[nid].children
            best = kids[0]
            for c in kids:
                if self.nodes[c].size >= self.nodes[best].size:
                    best = c
            nid = best
        return nid

    def delete(self, donor_id: str) -> DonationTree:
        """Remove a donor leaf and lower every ancestor's claim by its claimed value."""
        self._check_editable()
        target = self.leaf_of(donor_id).id
        if self.root == target:
            self.nodes.clear()
            self.donor_index.clear()
            self.root = None
            self.touched = 1
            return self
        last = self._last_leaf()
        touched = 1
        # detach the last leaf, collapsing its parent if it becomes unary
        parent = self.nodes[last].parent
        pnode = self.nodes[parent]
        pnode.children.remove(last)
        start = parent
        if len(pnode.children) == 1:
            only = pnode.children[0]
            start = pnode.parent
            self._replace_child(pnode.parent, parent, only)
            del self.nodes[parent]
            touched += 2
        touched += self._adjust_up(start, -self.nodes[last].claimed, -1)
        if last != target:
            # move the detached leaf into the deleted donor's slot
            tnode = self.nodes[target]
            self._replace_child(tnode.parent, target, last)
            touched += self._adjust_up(tnode.parent, self.nodes[last].claimed - tnode.claimed, 0)
        del self.nodes[target]
        del self.donor_index[donor_id]
        self.touched = touched
        return self

    def set_claim(self, node_id: int, value: Money) -> DonationTree:
        if not is_money(value):
            raise TreeError(f"claimed value must be an integer, got {value!r}")
        self.node(node_id).claimed = value
        return self

    # ---- validation -----------------------------------------------------

    def check_structure(self) -> None:
        """Raise :class:`TreeError` unless all structural invariants hold."""
        if self.root is None:
            if self.nodes or self.donor_index:
                raise TreeError("empty tree must have no nodes")
            return
        roots = [n.id for n in self.nodes.values() if n.parent is None]
        if roots != [self.root]:
            raise TreeError(f"expected single root {self.root}, found {roots}")
        seen: set[int] = set()
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise TreeError(f"node {nid} reachable twice (cycle or shared child)")
            seen.add(nid)
            node = self.nodes[nid]
            if node.is_leaf:
                if node.children:
                    raise TreeError(f"leaf {nid} has children")
                if self.donor_index.get(node.donor.donor_id) != nid:
                    raise TreeError(f"donor index does not point at leaf {nid}")
                if node.size != 1 or node.height != 0:
                    raise TreeError(f"leaf {nid} has size {node.size}, height {node.height}")
                continue
            lo = 1 if (self.forest and nid == self.root) else 2
            hi = len(node.children) if (self.forest and nid == self.root) else self.k
            if not lo <= len(node.children) <= hi:
                raise TreeError(f"internal node {nid} has {len(node.children)} children, allowed {lo}..{hi}")
            if node.children != sorted(node.children):
                raise TreeError(f"children of {nid} not sorted by id")
            for c in node.children:
                if c not in self.nodes or self.nodes[c].parent != nid:
                    raise TreeError(f"child {c} of {nid} has wrong parent link")
            if node.size != sum(self.nodes[c].size for c in node.children):
                raise TreeError(f"size of {nid} is stale")
            if node.height != 1 + max(self.nodes[c].height for c in node.children):
                raise TreeError(f"height of {nid} is stale")
            stack.extend(node.children)
        if seen != set(self.nodes):
            raise TreeError("tree is not connected")
        if len(self.donor_index) != sum(1 for n in self.nodes.values() if n.is_leaf):
            raise TreeError("donor index does not match leaf set")


# ---- construction ------------------------------------------------------------


def _check_donations(donations: Sequence[DonorRecord], k: int, allow_negative: bool) -> None:
    if not donations:
        raise TreeError("cannot build a tree from an empty donation list")
    if not isinstance(k, int) or k < 2:
        raise TreeError(f"arity k must be an integer >= 2, got {k!r}")
    seen: set[str] = set()
    for rec in donations:
        _validate_record(rec, allow_negative)
        if rec.donor_id in seen:
            raise DuplicateDonorError(f"duplicate donor {rec.donor_id!r}")
        seen.add(rec.donor_id)


def build_tree(donations: Sequence[DonorRecord], k: int, allow_negative: bool = False) -> DonationTree:
    """Build an honest, size-balanced tree in linear time."""
    _check_donations(donations, k, allow_negative)
    tree = DonationTree(k, allow_negative)
    leaf_ids = [tree._add_leaf(rec) for rec in donations]
    tree.root = tree._build_group(leaf_ids)
    return tree


def build_region_forest(
    donations: Sequence[DonorRecord],
    boundaries: Sequence[Money],
    k: int,
    allow_negative: bool = False,
) -> DonationTree:
    """One honest subtree per nonempty region, all linked under a single root.

    The root may have more than ``k`` children, and has a single child when
    only one region is populated.  Empty regions contribute no subtree.
    """
    _check_donations(donations, k, allow_negative)
    check_boundaries(boundaries)
    groups: dict[int, list[int]] = {}
    for pos, rec in enumerate(donations):
        try:
            j = region_index(boundaries, rec.amount)
        except ValueError:
            raise TreeError(
                f"donor {rec.donor_id!r}: amount {rec.amount} outside "
                f"[{boundaries[0]}, {boundaries[-1]}]"
            ) from None
        groups.setdefault(j, []).append(pos)
    tree = DonationTree(k, allow_negative)
    leaf_ids = [tree._add_leaf(rec) for rec in donations]
    subroots = [tree._build_group([leaf_ids[p] for p in groups[j]]) for j in sorted(groups)]
    tree.root = tree._add_internal(subroots)
    tree.forest = True
    return tree


# ---- functional wrappers --------------------------------------------------------


def insert_donation(tree: DonationTree, record: DonorRecord) -> DonationTree:
    return tree.copy().insert(record)


def delete_donation(tree: DonationTree, donor_id: str) -> DonationTree:
    return tree.copy().delete(donor_id)


def set_claim(tree: DonationTree, node_id: int, value: Money) -> DonationTree:
    return tree.copy().set_claim(node_id, value)


# ---- verification and oracles ---------------------------------------------------


def ground_truth_sum(tree: DonationTree, node_id: int) -> Money:
    """Sum of true leaf amounts under ``node_id``; ignores claimed values."""
    total = 0
    stack = [tree.node(node_id).id]
    while stack:
        node = tree.nodes[stack.pop()]
        if node.is_leaf:
            total += node.donor.amount
        else:
            stack.extend(node.children)
    return total


def verify_donor_path(tree: DonationTree, donor_id: str, claimed_donation: Money) -> PathReport:
    """Run the donor's check: own leaf value, then every ancestor's sum."""
    leaf = tree.leaf_of(donor_id)
    checks = []
    steps = 1
    for nid in tree.ancestors(leaf.id):
        node = tree.nodes[nid]
        steps += len(node.children)
        checks.append(NodeCheck(nid, node.claimed, sum(tree.nodes[c].claimed for c in node.children)))
    return PathReport(donor_id, claimed_donation, leaf.claimed, tuple(checks), steps)


def node_failures(tree: DonationTree) -> dict[int, str]:
    """Internal nodes whose claim differs from their children's claims, with kind."""
    out = {}
    for nid, node in tree.nodes.items():
        if node.is_leaf:
            continue
        check = NodeCheck(nid, node.claimed, sum(tree.nodes[c].claimed for c in node.children))
        if not check.ok:
            out[nid] = check.kind
    return out


def _flagged_paths(tree: DonationTree) -> dict[int, bool]:
    """Map leaf id -> whether some ancestor fails its sum check."""
    bad = node_failures(tree)
    flags: dict[int, bool] = {}
    if tree.root is None:
        return flags
    stack = [(tree.root, False)]
    while stack:
        nid, above = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            flags[nid] = above
        else:
            here = above or nid in bad
            stack.extend((c, here) for c in node.children)
    return flags


def error_leaves(tree: DonationTree, truth: dict[str, Money] | None = None) -> set[str]:
    """Donors whose path check with their true amount reports an error.

    True amounts come from the leaf records unless ``truth`` overrides them.
    Donors missing from the tree are not included here.
    """
    flags = _flagged_paths(tree)
    out = set()
    for donor_id, nid in tree.donor_index.items():
        node = tree.nodes[nid]
        amount = node.donor.amount if truth is None else truth.get(donor_id, node.donor.amount)
        if flags[nid] or node.claimed != amount:
            out.add(donor_id)
    return out


def deficit(tree: DonationTree) -> Money:
    """True total minus claimed total at the root."""
    if tree.root is None:
        return 0
    return ground_truth_sum(tree, tree.root) - tree.nodes[tree.root].claimed


def check_count_lemma(tree: DonationTree) -> bool:
    """Whether the error leaves' true mass covers the root deficit.

    Guaranteed for nonnegative amounts and claims.  A negative claim on an
    under-claiming node inflates the deficit beyond the node's own leaf mass,
    so the inequality can fail there.
    """
    mass = sum(tree.leaf_of(d).donor.amount for d in error_leaves(tree))
    return mass >= deficit(tree)


def with_truth(tree: DonationTree, truth: Iterable[DonorRecord]) -> tuple[DonationTree, list[DonorRecord]]:
    """Copy of ``tree`` whose leaf records carry true amounts.

    Returns the copy and the truth records absent from the tree.  Raises
    :class:`TreeError` if the tree holds a donor the truth does not know.
    """
    truth = list(truth)
    by_id = {r.donor_id: r for r in truth}
    if len(by_id) != len(truth):
        raise DuplicateDonorError("duplicate donor in truth records")
    unknown = sorted(set(tree.donor_index) - set(by_id))
    if unknown:
        raise TreeError(f"published tree lists donors absent from the truth: {unknown[:5]}")
    out = tree.copy()
    for donor_id, nid in out.donor_index.items():
        out.nodes[nid].donor = by_id[donor_id]
    omitted = [r for r in truth if r.donor_id not in tree.donor_index]
    return out, omitted
