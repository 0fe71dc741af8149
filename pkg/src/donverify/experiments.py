"""Seeded experiment suite behind the acceptance criteria.

Each ``criterion_*`` function is deterministic given its seed and returns a
JSON-ready dict with at least ``criterion``, ``name``, ``passed`` and
``summary``.  :func:`write_reports` runs them all and writes one JSON file
per criterion plus the tampered example simulation report in JSON and CSV, so two runs
with the same seed can be compared byte for byte.

Run as ``python -m donverify.experiments OUT_DIR [--seed N]``.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import random
from fractions import Fraction
from pathlib import Path

from .adversary import (
    negative_pair,
    omit_big_donor,
    random_skim,
    scenario_reports,
    distinguishing_advantage,
)
from .participation import Exponential, Regional, Uniform, make_partition
from .simulator import (
    bound_exponential_failure,
    bound_regional_failure,
    bound_regional_failure_per_donor,
    bound_uniform_detection,
    detecting_set,
    dumps_report,
    epsilon_of,
    estimate_detection,
    exact_detection,
    exact_failure,
    region_masses,
    simulation_row,
)
from .tree import (
    DonorRecord,
    TOUCH_EXTRA,
    TOUCH_FACTOR,
    build_region_forest,
    build_tree,
    check_count_lemma,
    deficit,
    error_leaves,
    ground_truth_sum,
    node_failures,
    set_claim,
    verify_donor_path,
)

# relative slack for comparing two floating-point evaluations of equal quantities
FLOAT_RTOL = 1e-12
BAND_SIGMAS = 3.0  # 99.7% binomial band


def example_donations() -> list[DonorRecord]:
    return [DonorRecord("d", 1), DonorRecord("e", 5), DonorRecord("f", 10), DonorRecord("g", 84)]


def example_trees():
    """Honest tree (ids: d=0 e=1 f=2 g=3 b=4 c=5 a=6) and its tampered twin."""
    honest = build_tree(example_donations(), 2)
    tampered = set_claim(set_claim(honest, 6, 96), 5, 90)
    return honest, tampered


def random_donations(rng: random.Random, n: int, lo: int, hi: int, prefix: str = "p") -> list[DonorRecord]:
    return [DonorRecord(f"{prefix}{i}", rng.randint(lo, hi)) for i in range(n)]


def log_uniform_donations(rng: random.Random, n: int, lo: int, hi: int) -> list[DonorRecord]:
    out = []
    for i in range(n):
        x = math.exp(rng.uniform(math.log(lo), math.log(hi + 1)))
        out.append(DonorRecord(f"p{i}", min(hi, max(lo, int(x)))))
    return out


def min_deficit(epsilon: float, total: int) -> int:
    return math.ceil(Fraction(epsilon) * total)


def cheating_tree(rng: random.Random, donations, k: int, epsilon: float, forest_bounds=None):
    """Honest tree skimmed by a uniform draw from ``[ceil(eps * M), M]``."""
    if forest_bounds is None:
        tree = build_tree(donations, k)
    else:
        tree = build_region_forest(donations, forest_bounds, k)
    total = sum(r.amount for r in donations)
    skim = rng.randint(max(1, min_deficit(epsilon, total)), total)
    return random_skim(tree, skim, rng.getrandbits(32))


def random_edits(rng: random.Random, tree, count: int):
    out = tree.copy()
    for nid in rng.sample(sorted(out.nodes), min(count, len(out.nodes))):
        top = 2 * ground_truth_sum(out, nid)
        out.set_claim(nid, rng.randint(0, top))
    return out


# ---- criteria ---------------------------------------------------------------------------


def criterion_worked_example(seed: int = 0) -> dict:
    honest, tampered = example_trees()
    found = sorted(error_leaves(tampered))
    failing = {str(n): k for n, k in node_failures(tampered).items()}
    c_check = next(c for c in verify_donor_path(tampered, "f", 10).node_checks if c.node_id == 5)
    f_err = verify_donor_path(tampered, "f", 10).is_error
    d_err = verify_donor_path(tampered, "d", 1).is_error
    eps = epsilon_of(tampered)
    passed = (
        found == ["f", "g"]
        and failing == {"5": "under-claim"}
        and (c_check.claimed, c_check.children_sum) == (90, 94)
        and deficit(tampered) == 4
        and abs(eps - 0.04) < 1e-15
        and f_err
        and not d_err
        and not error_leaves(honest)
    )
    return {
        "criterion": 1,
        "name": "worked example",
        "passed": passed,
        "detecting_set": found,
        "failing_nodes": failing,
        "node_c": [c_check.claimed, c_check.children_sum],
        "deficit": deficit(tampered),
        "epsilon": eps,
        "verify_f_error": f_err,
        "verify_d_error": d_err,
        "summary": f"detecting set {found}, node c {c_check.claimed}<{c_check.children_sum}, deficit {deficit(tampered)}, eps {eps}",
    }


def criterion_count_lemma(seed: int = 0, instances: int = 1000) -> dict:
    rng = random.Random(seed)
    failures, positive = [], 0
    for i in range(instances):
        n = rng.randint(1, 64)
        k = rng.choice((2, 3, 5))
        tree = build_tree(random_donations(rng, n, 1, 100), k)
        if rng.random() < 0.5:
            tree = random_edits(rng, tree, rng.randint(1, 6))
        else:
            tree = random_skim(tree, rng.randint(1, ground_truth_sum(tree, tree.root)), rng.getrandbits(32))
            if rng.random() < 0.5:
                tree = random_edits(rng, tree, rng.randint(1, 3))
        positive += deficit(tree) > 0
        if not check_count_lemma(tree):
            failures.append(i)
    return {
        "criterion": 2,
        "name": "count lemma property",
        "passed": not failures,
        "instances": instances,
        "with_positive_deficit": positive,
        "counterexamples": failures,
        "summary": f"{instances - len(failures)}/{instances} instances satisfy the lemma ({positive} with positive deficit)",
    }


def _oracle_instance(rng: random.Random):
    while True:
        n = rng.randint(2, 40)
        k = rng.choice((2, 3, 4))
        donations = random_donations(rng, n, 1, 200)
        tree = cheating_tree(rng, donations, k, rng.choice((0.01, 0.05, 0.2)))
        if 1 <= len(detecting_set(tree)) <= 20:
            break
    kind = rng.choice(("uniform", "exponential", "regional"))
    if kind == "uniform":
        model = Uniform(round(rng.uniform(0.01, 0.4), 4))
    elif kind == "exponential":
        model = Exponential(round(rng.uniform(0.0005, 0.01), 6))
    else:
        model = Regional((1, 10, 50, 200), tuple(round(rng.uniform(0.02, 0.4), 4) for _ in range(3)))
    return tree, donations, model


def criterion_oracle_equivalence(seed: int = 0, pairs: int = 50, trials: int = 100_000) -> dict:
    rng = random.Random(seed)
    rows, inside = [], 0
    for i in range(pairs):
        tree, truth, model = _oracle_instance(rng)
        p = exact_detection(tree, truth, model)
        est = estimate_detection(tree, truth, model, trials, seed * 1000 + i)
        half = BAND_SIGMAS * math.sqrt(p * (1 - p) / trials)
        ok = abs(est.p_hat - p) <= half
        inside += ok
        rows.append({
            "detecting": len(detecting_set(tree, truth)),
            "exact_p": p,
            "p_hat": est.p_hat,
            "band": half,
            "inside": ok,
        })
    return {
        "criterion": 3,
        "name": "oracle equivalence",
        "passed": inside >= pairs - 1,
        "inside": inside,
        "pairs": pairs,
        "trials": trials,
        "rows": rows,
        "summary": f"{inside}/{pairs} estimates inside the {BAND_SIGMAS:g}-sigma band (need >= {pairs - 1})",
    }


def criterion_exponential_bound(seed: int = 0, trees: int = 200) -> dict:
    rng = random.Random(seed)
    cells, violations, cases = [], 0, 0
    for lam, eps in itertools.product((0.001, 0.01, 0.1), (0.01, 0.05, 0.2)):
        bad, tightest = 0, 0.0
        for _ in range(trees):
            donations = random_donations(rng, rng.randint(2, 64), 1, 1000)
            tree = cheating_tree(rng, donations, rng.choice((2, 3, 5)), eps)
            total = sum(r.amount for r in donations)
            failure = exact_failure(tree, donations, Exponential(lam))
            bound = bound_exponential_failure(lam, eps, total)
            if failure > bound * (1 + FLOAT_RTOL):
                bad += 1
            if bound > 0:
                tightest = max(tightest, failure / bound)
            cases += 1
        violations += bad
        cells.append({"lambda": lam, "epsilon": eps, "violations": bad, "max_failure_over_bound": tightest})
    return {
        "criterion": 4,
        "name": "exponential bound",
        "passed": violations == 0,
        "cases": cases,
        "violations": violations,
        "cells": cells,
        "summary": f"{cases - violations}/{cases} cases within exp(-lambda*eps*M) ({trees} trees per grid cell)",
    }


def criterion_uniform_bound(seed: int = 0, trees: int = 200) -> dict:
    rng = random.Random(seed)
    cells, violations, cases = [], 0, 0
    for delta, a in itertools.product((0.05, 0.1, 0.3), (10, 100)):
        bad, tightest = 0, 0.0
        for _ in range(trees):
            eps = rng.choice((0.01, 0.05, 0.2))
            donations = random_donations(rng, rng.randint(2, 64), 1, a)
            tree = cheating_tree(rng, donations, rng.choice((2, 3, 5)), eps)
            total = sum(r.amount for r in donations)
            detect = exact_detection(tree, donations, Uniform(delta))
            bound = bound_uniform_detection(delta, eps, total, a)
            if detect < bound * (1 - FLOAT_RTOL):
                bad += 1
            tightest = max(tightest, bound - detect)
            cases += 1
        violations += bad
        cells.append({"delta": delta, "a": a, "violations": bad, "max_bound_minus_detection": tightest})
    return {
        "criterion": 5,
        "name": "uniform bound",
        "passed": violations == 0,
        "cases": cases,
        "violations": violations,
        "cells": cells,
        "summary": f"{cases - violations}/{cases} cases reach 1-(1-delta)^ceil(eps*M/a) ({trees} trees per grid cell)",
    }


# (a0, a, ratio): from many thin low regions to a few heavy high ones
REGION_LAYOUTS = (
    (1, 100, 1.0),
    (1, 1000, 1.0),
    (1, 1000, 2.0),
    (10, 1000, 0.5),
    (100, 1000, 0.5),
    (50, 400, 1.0),
    (100, 150, 0.5),
)


def criterion_regional_bound(seed: int = 0, instances: int = 100) -> dict:
    """Tests the ratio-scaled multi-region bound and a per-donor variant.

    ``passed`` reports whether the ratio-scaled bound held everywhere.  Every
    violation is listed in ``findings``; ``per_donor_violations`` counts failures
    of the variant whose exponent divides each region's mass by its upper
    boundary instead of by ``1 + ratio``.
    """
    rng = random.Random(seed)
    findings, per_donor_bad = [], 0
    for i in range(instances):
        a0, a, ratio = rng.choice(REGION_LAYOUTS)
        part = make_partition(a0, a, ratio)
        probs = tuple(round(rng.uniform(0.05, 0.6), 4) for _ in range(part.intervals))
        eps = rng.choice((0.05, 0.1, 0.2))
        donations = log_uniform_donations(rng, rng.randint(10, 80), a0, a)
        tree = cheating_tree(rng, donations, rng.choice((2, 3)), eps, forest_bounds=part.boundaries)
        model = Regional(part.boundaries, probs)
        failure = exact_failure(tree, donations, model)
        masses = region_masses(part.boundaries, donations)
        ratio_bound = bound_regional_failure(part, probs, eps, masses)
        per_donor = bound_regional_failure_per_donor(part.boundaries, probs, eps, masses)
        if failure > per_donor * (1 + FLOAT_RTOL):
            per_donor_bad += 1
        if failure > ratio_bound * (1 + FLOAT_RTOL):
            findings.append({
                "instance": i,
                "a0": a0, "a": a, "ratio": ratio, "epsilon": eps,
                "deficit": deficit(tree),
                "M": sum(masses),
                "failure": failure,
                "ratio_bound": ratio_bound,
                "per_donor_bound": per_donor,
            })
    return {
        "criterion": 6,
        "name": "regional bound",
        "passed": not findings,
        "instances": instances,
        "ratio_violations": len(findings),
        "per_donor_violations": per_donor_bad,
        "findings": findings,
        "summary": (
            f"ratio-scaled bound violated in {len(findings)}/{instances} instances; "
            f"per-donor variant violated in {per_donor_bad}/{instances}"
        ),
    }


def criterion_omit_donor(seed: int = 0, max_n: int = 64) -> dict:
    rng = random.Random(seed)
    worst, dirty, checked = 0.0, [], 0
    for n in range(1, max_n + 1):
        k = (2, 3, 5)[n % 3]
        donations = random_donations(rng, n, 1, 500)
        tree = build_tree(donations, k)
        big = max(donations, key=lambda r: (r.amount, r.donor_id)).donor_id
        targets = [r.donor_id for r in donations] if n <= 16 else sorted({big, rng.choice(donations).donor_id})
        for target in targets:
            for encoding in ("zero", "delete"):
                cheat = omit_big_donor(tree, target, encoding)
                if detecting_set(cheat, donations) != {target}:
                    dirty.append([n, target, encoding, "detecting set"])
                for r in donations:
                    if r.donor_id == target or r.donor_id not in cheat.donor_index:
                        continue
                    checked += 1
                    if verify_donor_path(cheat, r.donor_id, r.amount).is_error:
                        dirty.append([n, target, encoding, r.donor_id])
                for delta in (0.01, 0.1, 0.5):
                    worst = max(worst, abs(exact_detection(cheat, donations, Uniform(delta)) - delta))
    passed = worst <= 1e-12 and not dirty
    return {
        "criterion": 7,
        "name": "omit-donor impossibility",
        "passed": passed,
        "max_abs_error": worst,
        "reports_checked": checked,
        "unexpected": dirty,
        "summary": f"max |P(detect) - delta| = {worst:.3g}; {checked} other-donor reports, {len(dirty)} with errors",
    }


def criterion_negative_pair(seed: int = 0, max_n: int = 8) -> dict:
    rng = random.Random(seed)
    mismatches, subsets, worst = [], 0, 0.0
    for n in range(3, max_n + 1):
        for M in (1, n, rng.randint(2, 1000)):
            pair = negative_pair(n, M, k=rng.choice((2, 3)))
            donors = [r.donor_id for r in pair.truth("a")]
            for size in range(len(donors) + 1):
                for chosen in itertools.combinations(donors, size):
                    subsets += 1
                    cheat, honest = scenario_reports(pair, chosen)
                    differ = cheat != honest
                    if differ != (pair.distinguishing_donor in chosen):
                        mismatches.append([n, M, list(chosen)])
            for delta in (0.01, 0.1, 0.5):
                worst = max(worst, abs(distinguishing_advantage(pair, Uniform(delta)) - delta))
            if (pair.world_a.nodes[pair.world_a.root].claimed, pair.world_b.nodes[pair.world_b.root].claimed) != (1, 0):
                mismatches.append([n, M, "root totals"])
    return {
        "criterion": 8,
        "name": "negative-donation impossibility",
        "passed": not mismatches and worst <= 1e-12,
        "subsets": subsets,
        "mismatches": mismatches,
        "max_advantage_error": worst,
        "summary": f"{subsets} verifier subsets enumerated, {len(mismatches)} mismatches; advantage = delta within {worst:.3g}",
    }


def recompute_sums(tree) -> dict[int, int]:
    """Ground truth per node by walking up from every leaf."""
    sums = dict.fromkeys(tree.nodes, 0)
    for nid in tree.donor_index.values():
        amount = tree.nodes[nid].donor.amount
        cur = nid
        while cur is not None:
            sums[cur] += amount
            cur = tree.nodes[cur].parent
    return sums


def criterion_maintenance(seed: int = 0, ops: int = 10_000, k: int = 2) -> dict:
    rng = random.Random(seed)
    tree = build_tree(random_donations(rng, 64, 1, 1000, prefix="s"), k)
    present = [r.donor_id for r in tree.leaves()]
    next_id = 0
    problems, max_touched_ratio, max_depth_gap = [], 0.0, None
    for step in range(1, ops + 1):
        before = tree.depth()
        if present and (len(present) > 1 and rng.random() < 0.45):
            j = rng.randrange(len(present))
            present[j], present[-1] = present[-1], present[j]
            tree.delete(present.pop())
        else:
            donor = f"n{next_id}"
            next_id += 1
            tree.insert(DonorRecord(donor, rng.randint(1, 1000)))
            present.append(donor)
        depth = max(before, tree.depth())
        limit = TOUCH_FACTOR * depth + TOUCH_EXTRA
        if tree.touched > limit:
            problems.append([step, "touched", tree.touched, limit])
        max_touched_ratio = max(max_touched_ratio, tree.touched / max(depth, 1))
        gap = tree.depth_bound() - tree.depth()
        max_depth_gap = gap if max_depth_gap is None else min(max_depth_gap, gap)
        if gap < 0:
            problems.append([step, "depth", tree.depth(), tree.depth_bound()])
        if step % 100 == 0:
            tree.check_structure()
            sums = recompute_sums(tree)
            if any(tree.nodes[nid].claimed != s for nid, s in sums.items()):
                problems.append([step, "sums"])
    return {
        "criterion": 9,
        "name": "structural maintenance",
        "passed": not problems,
        "operations": ops,
        "final_donors": len(tree),
        "final_depth": tree.depth(),
        "min_depth_headroom": max_depth_gap,
        "max_touched_per_depth": max_touched_ratio,
        "problems": problems[:20],
        "summary": f"{ops} ops, {len(problems)} invariant breaches, final n={len(tree)} depth={tree.depth()}",
    }


CRITERIA = [
    criterion_worked_example,
    criterion_count_lemma,
    criterion_oracle_equivalence,
    criterion_exponential_bound,
    criterion_uniform_bound,
    criterion_regional_bound,
    criterion_omit_donor,
    criterion_negative_pair,
    criterion_maintenance,
]


def run_all(seed: int = 0) -> list[dict]:
    return [fn(seed) for fn in CRITERIA]


def write_reports(out_dir: str | Path, seed: int = 0, results: list[dict] | None = None) -> list[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = run_all(seed) if results is None else results
    for res in results:
        path = out / f"criterion_{res['criterion']:02d}.json"
        path.write_text(json.dumps(res, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _, tampered = example_trees()
    models = [Uniform(0.5), Exponential(0.01), Regional((1, 8, 64, 512), (0.1, 0.2, 0.3))]
    rows = [simulation_row(tampered, example_donations(), m, 100_000, seed) for m in models]
    (out / "simulation_example.json").write_text(dumps_report(rows, "json"), encoding="utf-8")
    (out / "simulation_example.csv").write_text(dumps_report(rows, "csv"), encoding="utf-8")
    return results


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="python -m donverify.experiments", description="run the seeded experiment suite")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    results = write_reports(args.out_dir, args.seed)
    for res in results:
        status = "PASS" if res["passed"] else "FAIL"
        print(f"[{status}] criterion {res['criterion']}: {res['name']}: {res['summary']}")
    return 0 if all(r["passed"] for r in results) else 1


if __name__ == "__main__":
    raise SystemExit(main())
