"""Cheating collectors: generic skims plus the two impossibility constructions."""
from __future__ import annotations

import itertools
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .money import Money, is_money
from .participation import ParticipationModel, participation_prob
from .tree import (
    DonationTree,
    DonorRecord,
    PathReport,
    TreeError,
    build_tree,
    delete_donation,
    ground_truth_sum,
    node_failures,
    verify_donor_path,
)


@dataclass(frozen=True)
class CheatSpec:
    """A list of claimed-value overrides, applied to a copy of a tree."""

    edits: tuple[tuple[int, Money], ...] = ()
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "edits", tuple((int(n), v) for n, v in self.edits))
        nodes = [n for n, _ in self.edits]
        if len(set(nodes)) != len(nodes):
            raise ValueError("cheat spec edits the same node twice")
        for n, v in self.edits:
            if not is_money(v):
                raise ValueError(f"edit for node {n}: V must be an integer, got {v!r}")

    def to_dict(self) -> dict:
        return {"edits": [{"node": n, "V": v} for n, v in self.edits], "description": self.description}

    @classmethod
    def from_dict(cls, doc: dict) -> CheatSpec:
        if not isinstance(doc, dict) or not isinstance(doc.get("edits", []), list):
            raise ValueError("cheat spec must be an object with an 'edits' list")
        try:
            edits = [(e["node"], e["V"]) for e in doc.get("edits", [])]
        except (KeyError, TypeError):
            raise ValueError("each edit needs 'node' and 'V'") from None
        return cls(tuple(edits), str(doc.get("description", "")))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def apply_cheat(tree: DonationTree, spec: CheatSpec) -> DonationTree:
    out = tree.copy()
    for node_id, value in spec.edits:
        out.set_claim(node_id, value)
    return out


def is_honest(tree: DonationTree) -> bool:
    if node_failures(tree):
        return False
    return all(tree.nodes[nid].claimed == tree.nodes[nid].donor.amount for nid in tree.donor_index.values())


def _require_honest(tree: DonationTree) -> None:
    if not is_honest(tree):
        raise TreeError("adversary constructions start from an honestly labeled tree")


def _lower(tree: DonationTree, node_id: int, amount: Money) -> None:
    tree.nodes[node_id].claimed -= amount
    for anc in tree.ancestors(node_id):
        tree.nodes[anc].claimed -= amount


def random_skim(
    tree: DonationTree,
    total_skim: Money,
    rng_seed: int,
    at: Sequence[int] | None = None,
) -> DonationTree:
    """Under-claim ``total_skim`` units spread over random nodes.

    Each piece lowers one node's claim and every ancestor's claim by the same
    amount, so the only failing sum check is at the chosen node itself (or
    the leaf check when a leaf is chosen).  No claim is driven below zero.
    ``at`` restricts the choice.
    """
    _require_honest(tree)
    if tree.root is None:
        raise TreeError("cannot skim an empty tree")
    top = ground_truth_sum(tree, tree.root)
    if not (is_money(total_skim) and 0 < total_skim <= top):
        raise TreeError(f"skim must lie in [1, {top}], got {total_skim!r}")
    candidates = sorted(tree.nodes) if at is None else sorted(set(at))
    for nid in candidates:
        tree.node(nid)
    rng = random.Random(rng_seed)
    out = tree.copy()
    remaining = total_skim
    while remaining:
        # claims stay nonnegative along every path
        room = {n: min([out.nodes[n].claimed] + [out.nodes[a].claimed for a in out.ancestors(n)]) for n in candidates}
        eligible = [n for n in candidates if room[n] > 0]
        if not eligible:
            raise TreeError(f"chosen nodes cannot absorb a skim of {total_skim}")
        nid = rng.choice(eligible)
        piece = rng.randint(1, min(remaining, room[nid]))
        _lower(out, nid, piece)
        remaining -= piece
    return out


def omit_big_donor(tree: DonationTree, donor_id: str, encoding: str = "zero") -> DonationTree:
    """Publish everything except one donor's money.

    ``encoding="zero"`` keeps the leaf with claim 0 and lowers its ancestors by
    the donation; ``"delete"`` removes the leaf altogether.  Either way every
    other donor's path checks pass.
    """
    _require_honest(tree)
    leaf = tree.leaf_of(donor_id)
    if encoding == "delete":
        return delete_donation(tree, donor_id)
    if encoding != "zero":
        raise ValueError(f"unknown omission encoding {encoding!r}")
    out = tree.copy()
    _lower(out, leaf.id, leaf.donor.amount)
    return out


@dataclass(frozen=True)
class ScenarioPair:
    """Two honest worlds whose files differ only on one donor's path."""

    world_a: DonationTree = field(compare=False)
    world_b: DonationTree = field(compare=False)
    distinguishing_donor: str

    def truth(self, world: str) -> list[DonorRecord]:
        return (self.world_a if world == "a" else self.world_b).leaves()


def negative_pair(n: int, M: Money, k: int = 2, allow_negative: bool = True) -> ScenarioPair:
    """Donors ``m1..m{n-2}`` give ``M`` in total, ``m{n-1}`` gives 1 or 0, ``m{n}`` gives ``-M``."""
    if not allow_negative:
        raise TreeError("the negative-donation scenario requires negative donations to be enabled")
    if not (isinstance(n, int) and n >= 3):
        raise TreeError(f"need n >= 3 donors, got {n!r}")
    if not (is_money(M) and M > 0):
        raise TreeError(f"M must be a positive integer, got {M!r}")
    share, rest = divmod(M, n - 2)
    base = [DonorRecord(f"m{i}", share + (rest if i == 1 else 0)) for i in range(1, n - 1)]
    last = DonorRecord(f"m{n}", -M)

    def world(bit: int) -> DonationTree:
        return build_tree(base + [DonorRecord(f"m{n - 1}", bit), last], k, allow_negative=True)

    return ScenarioPair(world(1), world(0), f"m{n - 1}")


def scenario_reports(pair: ScenarioPair, verifiers: Iterable[str]) -> tuple[Counter, Counter]:
    """Report multisets seen when world B's file is published.

    The first multiset is the cheating case (true amounts of world A), the
    second the honest case (true amounts of world B).
    """
    published = pair.world_b
    cheat = {r.donor_id: r.amount for r in pair.truth("a")}
    honest = {r.donor_id: r.amount for r in pair.truth("b")}
    chosen = sorted(set(verifiers))
    return (
        Counter(verify_donor_path(published, d, cheat[d]) for d in chosen),
        Counter(verify_donor_path(published, d, honest[d]) for d in chosen),
    )


def distinguishing_advantage(pair: ScenarioPair, model: ParticipationModel) -> float:
    """Probability, by enumerating every verifier subset, that the two cases differ.

    Exponential in the donor count; meant for small ``n``.
    """
    donors = pair.truth("a")
    probs = [participation_prob(model, r.amount) for r in donors]
    total = 0.0
    for picks in itertools.product((False, True), repeat=len(donors)):
        weight = 1.0
        for p, picked in zip(probs, picks):
            weight *= p if picked else 1 - p
        if weight == 0.0:
            continue
        chosen = [r.donor_id for r, picked in zip(donors, picks) if picked]
        cheat, honest = scenario_reports(pair, chosen)
        if cheat != honest:
            total += weight
    return total


def report_view(report: PathReport) -> tuple:
    """Verdict-level summary of a report, without the claimed values."""
    return (report.donor_id, report.leaf_ok, tuple((c.node_id, c.ok) for c in report.node_checks), report.is_error)
