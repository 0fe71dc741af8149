"""Detection probability: closed form, Monte Carlo, and the theoretical bounds."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _rng
from .intervals import region_index
from .money import Money
from .participation import (
    Exponential,
    ParticipationModel,
    Regional,
    RegionPartition,
    Uniform,
    model_to_dict,
    participation_prob,
    participation_probs,
    sample_verifiers,
)
from .tree import (
    DonationTree,
    DonorRecord,
    TreeError,
    error_leaves,
    node_failures,
    verify_donor_path,
)

Z95 = 1.959963984540054
TRIAL_CHUNK = 8192


@dataclass(frozen=True)
class TrialOutcome:
    detected: bool
    verifier_count: int
    detecting_donors: frozenset[str]


@dataclass(frozen=True)
class DetectionEstimate:
    trials: int
    detections: int
    p_hat: float
    ci_low: float
    ci_high: float
    seed: int


def _truth_list(tree: DonationTree, truth: Iterable[DonorRecord] | None) -> list[DonorRecord]:
    return tree.leaves() if truth is None else list(truth)


def detecting_set(tree: DonationTree, truth: Iterable[DonorRecord] | None = None) -> set[str]:
    """Donors who would report an error: failing paths plus donors left out of the tree."""
    records = _truth_list(tree, truth)
    amounts = {r.donor_id: r.amount for r in records}
    omitted = {d for d in amounts if d not in tree.donor_index}
    return error_leaves(tree, amounts) | omitted


def run_trial(
    tree: DonationTree,
    truth: Iterable[DonorRecord] | None,
    model: ParticipationModel,
    rng_seed: int,
) -> TrialOutcome:
    records = _truth_list(tree, truth)
    verifiers = sample_verifiers(model, records, rng_seed)
    amounts = {r.donor_id: r.amount for r in records}
    caught = set()
    for donor_id in verifiers:
        if donor_id not in tree.donor_index:
            caught.add(donor_id)  # the donor cannot find their own leaf
        elif verify_donor_path(tree, donor_id, amounts[donor_id]).is_error:
            caught.add(donor_id)
    return TrialOutcome(bool(caught), len(verifiers), frozenset(caught))


def exact_failure(
    tree: DonationTree,
    truth: Iterable[DonorRecord] | None,
    model: ParticipationModel,
) -> float:
    """Probability that no donor of the detecting set verifies: ``prod(1 - p_m)``."""
    records = _truth_list(tree, truth)
    found = detecting_set(tree, records)
    miss = Counter(1.0 - participation_prob(model, r.amount) for r in records if r.donor_id in found)
    # equal probabilities are raised to a power so closed-form bounds compare exactly
    return math.prod(q**c for q, c in sorted(miss.items()))


def exact_detection(
    tree: DonationTree,
    truth: Iterable[DonorRecord] | None,
    model: ParticipationModel,
) -> float:
    """``1 - prod(1 - p_m)`` over the detecting set."""
    return 1.0 - exact_failure(tree, truth, model)


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return max(0.0, min(p, center - half)), min(1.0, max(p, center + half))


def estimate_detection(
    tree: DonationTree,
    truth: Iterable[DonorRecord] | None,
    model: ParticipationModel,
    trials: int,
    seed: int,
) -> DetectionEstimate:
    """Monte Carlo estimate over ``trials`` independent trials.

    Trial ``i`` uses seed ``_rng.trial_seed(seed, i)`` and detects exactly when
    ``run_trial`` with that seed would; only the detecting donors' draws are
    evaluated, in vectorized chunks.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    records = _truth_list(tree, truth)
    found = detecting_set(tree, records)
    hits = [r for r in records if r.donor_id in found]
    detections = 0
    if hits:
        probs = participation_probs(model, (r.amount for r in hits))
        keys = _rng.donor_keys(r.donor_id for r in hits)
        for start in range(0, trials, TRIAL_CHUNK):
            stop = min(trials, start + TRIAL_CHUNK)
            skeys = _rng.seed_keys_u64(_rng.trial_seeds(seed, start, stop))
            u = _rng.uniforms(skeys, keys)
            detections += int(np.count_nonzero((u < probs).any(axis=1)))
    lo, hi = wilson_interval(detections, trials)
    return DetectionEstimate(trials, detections, detections / trials, lo, hi, seed)


# ---- theoretical bounds ------------------------------------------------------------


def bound_exponential_failure(lam: float, epsilon: float, M: Money) -> float:
    """Upper bound ``exp(-lambda * epsilon * M)`` on the chance no one detects."""
    if lam < 0 or not 0 <= epsilon <= 1 or M < 0:
        raise ValueError("need lambda >= 0, 0 <= epsilon <= 1, M >= 0")
    return math.exp(-lam * epsilon * M)


def bound_uniform_detection(delta: float, epsilon: float, M: Money, a: Money) -> float:
    """Lower bound ``1 - (1 - delta) ** ceil(epsilon * M / a)`` on detection."""
    if not 0 <= delta <= 1 or not 0 <= epsilon <= 1 or a < 1:
        raise ValueError("need 0 <= delta <= 1, 0 <= epsilon <= 1, a >= 1")
    return 1.0 - (1.0 - delta) ** math.ceil(epsilon * M / a)


def bound_regional_failure(
    partition: RegionPartition | None,
    probs: Sequence[float],
    epsilon: float,
    region_masses: Sequence[Money],
    ratio: float | None = None,
) -> float:
    """``sum_j (1 - p_j) ** (epsilon * M_j / (1 + ratio))``, clamped to [0, 1]."""
    if partition is not None and len(probs) != partition.intervals:
        raise ValueError(f"{len(probs)} probabilities for {partition.intervals} intervals")
    if len(probs) != len(region_masses):
        raise ValueError(f"{len(probs)} probabilities but {len(region_masses)} region masses")
    if ratio is None:
        if partition is None:
            raise ValueError("ratio is required without a partition")
        ratio = partition.ratio
    total = sum((1.0 - p) ** (epsilon * m / (1 + ratio)) for p, m in zip(probs, region_masses))
    return min(1.0, max(0.0, total))


def bound_regional_failure_per_donor(
    boundaries: Sequence[Money],
    probs: Sequence[float],
    epsilon: float,
    region_masses: Sequence[Money],
) -> float:
    """Variant that counts donors instead of money: exponent ``epsilon * M_j / a_{j+1}``.

    A region whose donations are at most ``a_{j+1}`` needs at least
    ``epsilon * M_j / a_{j+1}`` failing donors to hide ``epsilon * M_j``.
    """
    total = sum(
        (1.0 - p) ** (epsilon * m / hi) for p, m, hi in zip(probs, region_masses, boundaries[1:])
    )
    return min(1.0, max(0.0, total))


def partition_of(model: Regional) -> RegionPartition:
    """Partition matching a regional model, with its tightest growth ratio."""
    b = model.boundaries
    ratio = max((hi / lo - 1 for lo, hi in zip(b, b[1:])), default=0.0)
    return RegionPartition(b[0], b[-1], ratio, tuple(b))


def region_masses(boundaries: Sequence[Money], records: Iterable[DonorRecord]) -> list[Money]:
    masses = [0] * (len(boundaries) - 1)
    for r in records:
        masses[region_index(boundaries, r.amount)] += r.amount
    return masses


def epsilon_of(tree: DonationTree, truth: Iterable[DonorRecord] | None = None) -> float:
    """Fraction of the true total missing from the claimed root value."""
    records = _truth_list(tree, truth)
    total = sum(r.amount for r in records)
    if total <= 0:
        raise TreeError(f"true total {total} is not positive; epsilon is undefined")
    claimed = tree.nodes[tree.root].claimed if tree.root is not None else 0
    return (total - claimed) / total


# ---- audit and reports ------------------------------------------------------------------


def audit(tree: DonationTree, truth: Sequence[DonorRecord]) -> dict:
    """Omniscient check of a published tree against every donor's true amount."""
    amounts = {r.donor_id: r.amount for r in truth}
    if len(amounts) != len(truth):
        raise TreeError("duplicate donor in truth records")
    unknown = sorted(set(tree.donor_index) - set(amounts))
    if unknown:
        raise TreeError(f"published tree lists donors absent from the truth: {unknown[:5]}")
    total = sum(amounts.values())
    claimed = tree.nodes[tree.root].claimed if tree.root is not None else 0
    shortfall = total - claimed
    kinds: dict[str, list[str]] = {}
    for donor_id, amount in amounts.items():
        if donor_id not in tree.donor_index:
            kinds[donor_id] = ["omitted"]
            continue
        report = verify_donor_path(tree, donor_id, amount)
        if report.is_error:
            kinds[donor_id] = sorted(set(report.failures()))
    mass = sum(amounts[d] for d in kinds)
    counts = Counter(k for ks in kinds.values() for k in ks)
    return {
        "donors": len(amounts),
        "true_total": total,
        "claimed_total": claimed,
        "deficit": shortfall,
        "epsilon": shortfall / total if total > 0 else None,
        "detecting_set": sorted(kinds),
        "classification": {d: kinds[d] for d in sorted(kinds)},
        "kind_counts": dict(sorted(counts.items())),
        "failing_nodes": {str(n): k for n, k in sorted(node_failures(tree).items())},
        "detecting_mass": mass,
        "count_lemma_holds": mass >= shortfall,
    }


REPORT_COLUMNS = [
    "model", "lambda", "delta", "probs", "epsilon", "M", "exact_p",
    "p_hat", "ci_low", "ci_high", "bound", "bound_kind", "bound_holds",
]


def simulation_row(
    tree: DonationTree,
    truth: Sequence[DonorRecord],
    model: ParticipationModel,
    trials: int,
    seed: int,
) -> dict:
    failure = exact_failure(tree, truth, model)
    exact = 1.0 - failure
    est = estimate_detection(tree, truth, model, trials, seed)
    total = sum(r.amount for r in truth)
    eps = epsilon_of(tree, truth)
    eps_b = min(1.0, max(0.0, eps))
    cfg = model_to_dict(model)
    row = {
        "model": cfg["type"],
        "lambda": cfg.get("lambda"),
        "delta": cfg.get("delta"),
        "probs": cfg.get("probs"),
        "epsilon": eps,
        "M": total,
        "exact_p": exact,
        "p_hat": est.p_hat,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
    }
    if isinstance(model, Exponential):
        bound = bound_exponential_failure(model.lam, eps_b, total)
        row.update(bound=bound, bound_kind="failure<=", bound_holds=failure <= bound)
    elif isinstance(model, Uniform):
        bound = bound_uniform_detection(model.delta, eps_b, total, max(r.amount for r in truth))
        row.update(bound=bound, bound_kind="detection>=", bound_holds=exact >= bound)
    else:
        masses = region_masses(model.boundaries, truth)
        bound = bound_regional_failure(partition_of(model), model.probs, eps_b, masses)
        row.update(bound=bound, bound_kind="failure<=", bound_holds=failure <= bound)
    return row


def dumps_report(rows: Sequence[dict], fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps({"columns": REPORT_COLUMNS, "rows": list(rows)}, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            out = dict(row)
            if out.get("probs") is not None:
                out["probs"] = " ".join(repr(p) for p in out["probs"])
            writer.writerow({k: ("" if out.get(k) is None else out[k]) for k in REPORT_COLUMNS})
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")
