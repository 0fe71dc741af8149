"""Donor participation models and verifier sampling.

Three models decide how likely a donor is to run the path check:

* :class:`Exponential` -- probability ``1 - exp(-lambda * s)`` for a
  donation of ``s`` minor units (0 for ``s <= 0``).
* :class:`Uniform` -- the same probability ``delta`` for everyone.
* :class:`Regional` -- probability ``probs[j]`` for donations falling in
  interval ``j`` of a boundary list.

Sampling draws one uniform per donor from a stream keyed on
``(seed, donor_id)`` (see :mod:`donverify._rng`), so the chosen set does not
depend on the order donors are listed in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from . import _rng
from .intervals import check_boundaries, region_index
from .money import Money
from .tree import DonorRecord


@dataclass(frozen=True)
class Exponential:
    lam: float

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be a finite nonnegative rate, got {self.lam!r}")


@dataclass(frozen=True)
class Uniform:
    delta: float

    def __post_init__(self):
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta!r}")


@dataclass(frozen=True)
class Regional:
    boundaries: tuple[Money, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(self.boundaries))
        object.__setattr__(self, "probs", tuple(self.probs))
        check_boundaries(self.boundaries)
        if len(self.probs) != len(self.boundaries) - 1:
            raise ValueError(
                f"need {len(self.boundaries) - 1} probabilities for "
                f"{len(self.boundaries)} boundaries, got {len(self.probs)}"
            )
        for p in self.probs:
            if not 0 <= p <= 1:
                raise ValueError(f"probability {p!r} outside [0, 1]")


ParticipationModel = Union[Exponential, Uniform, Regional]


@dataclass(frozen=True)
class RegionPartition:
    a0: Money
    a: Money
    ratio: float
    boundaries: tuple[Money, ...]

    @property
    def intervals(self) -> int:
        return len(self.boundaries) - 1

    def region_of(self, amount: Money) -> int:
        return region_index(self.boundaries, amount)


def participation_prob(model: ParticipationModel, amount: Money) -> float:
    if isinstance(model, Exponential):
        if amount <= 0:
            return 0.0
        return -math.expm1(-model.lam * amount)
    if isinstance(model, Uniform):
        return float(model.delta)
    if isinstance(model, Regional):
        return float(model.probs[region_index(model.boundaries, amount)])
    raise TypeError(f"unknown participation model {model!r}")


def participation_probs(model: ParticipationModel, amounts: Iterable[Money]) -> np.ndarray:
    return np.array([participation_prob(model, s) for s in amounts], dtype=np.float64)


def sample_verifiers(model: ParticipationModel, donors: Sequence[DonorRecord], rng_seed: int) -> set[str]:
    """Donors who choose to verify, each included independently."""
    if not donors:
        return set()
    probs = participation_probs(model, (d.amount for d in donors))
    keys = _rng.donor_keys(d.donor_id for d in donors)
    u = _rng.uniforms(_rng.seed_keys([rng_seed]), keys)[0]
    return {d.donor_id for d, hit in zip(donors, u < probs) if hit}


def make_partition(a0: Money, a: Money, ratio: float) -> RegionPartition:
    """Geometric integer boundaries from ``a0`` to ``a`` growing by at most ``1 + ratio``.

    Each boundary is ``min(a, floor(prev * (1 + ratio)))``, computed exactly.
    """
    if not (isinstance(a0, int) and isinstance(a, int)) or not 0 < a0 <= a:
        raise ValueError(f"need integers 0 < a0 <= a, got a0={a0!r}, a={a!r}")
    if not ratio > 0:
        raise ValueError(f"ratio must be positive, got {ratio!r}")
    if a0 == a:
        return RegionPartition(a0, a, ratio, (a0, a))
    growth = 1 + Fraction(ratio)
    bounds = [a0]
    while bounds[-1] < a:
        nxt = min(a, math.floor(bounds[-1] * growth))
        if nxt <= bounds[-1]:
            raise ValueError(
                f"ratio {ratio} is too small to grow integer boundary {bounds[-1]}; "
                "use a larger ratio or a larger a0"
            )
        bounds.append(nxt)
    return RegionPartition(a0, a, ratio, tuple(bounds))


# ---- config files --------------------------------------------------------------


def model_from_dict(doc: dict) -> ParticipationModel:
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValueError("model config must be an object with a 'type' key")
    kind = doc["type"]
    if kind == "exponential":
        return Exponential(float(doc["lambda"]))
    if kind == "uniform":
        return Uniform(float(doc["delta"]))
    if kind == "regional":
        return Regional(tuple(int(b) for b in doc["boundaries"]), tuple(float(p) for p in doc["probs"]))
    raise ValueError(f"unknown model type {kind!r}")


def model_to_dict(model: ParticipationModel) -> dict:
    if isinstance(model, Exponential):
        return {"type": "exponential", "lambda": model.lam}
    if isinstance(model, Uniform):
        return {"type": "uniform", "delta": model.delta}
    return {"type": "regional", "boundaries": list(model.boundaries), "probs": list(model.probs)}
