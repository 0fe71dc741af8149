import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import records
from donverify import _rng
from donverify.intervals import check_boundaries, region_index
from donverify.participation import (
    Exponential,
    Regional,
    Uniform,
    make_partition,
    model_from_dict,
    model_to_dict,
    participation_prob,
    sample_verifiers,
)


def test_exponential_prob():
    m = Exponential(0.01)
    assert participation_prob(m, 100) == pytest.approx(1 - math.exp(-1), rel=1e-15)
    assert participation_prob(m, 0) == 0.0
    assert participation_prob(m, -5) == 0.0
    assert participation_prob(Exponential(0.0), 10**9) == 0.0
    # tiny rates keep full precision
    assert participation_prob(Exponential(1e-12), 1) == pytest.approx(1e-12, rel=1e-9)


def test_uniform_and_regional_prob():
    assert participation_prob(Uniform(0.3), 12345) == 0.3
    m = Regional((1, 8, 64, 512), (0.1, 0.2, 0.3))
    assert [participation_prob(m, s) for s in (1, 7, 8, 63, 64, 512)] == [0.1, 0.1, 0.2, 0.2, 0.3, 0.3]
    with pytest.raises(ValueError, match="outside"):
        participation_prob(m, 513)


@pytest.mark.parametrize("build", [
    lambda: Exponential(-1.0),
    lambda: Exponential(float("inf")),
    lambda: Uniform(1.5),
    lambda: Regional((1, 8), (0.1, 0.2)),
    lambda: Regional((1, 8, 8), (0.1, 0.2)),
    lambda: Regional((1, 8), (1.2,)),
    lambda: Regional((1,), ()),
])
def test_model_validation(build):
    with pytest.raises(ValueError):
        build()


def test_intervals():
    check_boundaries((5, 5))
    assert region_index((5, 5), 5) == 0
    b = (1, 10, 100)
    assert [region_index(b, s) for s in (1, 9, 10, 100)] == [0, 0, 1, 1]
    with pytest.raises(ValueError):
        region_index(b, 0)


def test_make_partition():
    p = make_partition(1, 1000, 1.0)
    assert p.boundaries == (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1000)
    assert p.intervals == 10 and p.region_of(1000) == 9
    assert make_partition(10, 1000, 0.5).boundaries[:4] == (10, 15, 22, 33)
    assert make_partition(7, 7, 1.0).boundaries == (7, 7)
    with pytest.raises(ValueError, match="too small"):
        make_partition(1, 100, 0.5)
    with pytest.raises(ValueError):
        make_partition(5, 4, 1.0)


@given(st.integers(1, 10**6), st.integers(0, 10**6), st.sampled_from([0.5, 1.0, 2.0, 0.25, 3.0]))
def test_partition_growth(a0, extra, ratio):
    a = a0 + extra
    try:
        p = make_partition(a0, a, ratio)
    except ValueError:
        assert math.floor(a0 * (1 + ratio)) <= a0
        return
    b = p.boundaries
    assert b[0] == a0 and b[-1] == a
    for lo, hi in zip(b, b[1:]):
        assert lo < hi <= lo * (1 + ratio) or (lo == hi == a0)


def test_model_config_round_trip():
    for m in (Exponential(0.01), Uniform(0.25), Regional((1, 8, 64), (0.1, 0.2))):
        assert model_from_dict(model_to_dict(m)) == m
    with pytest.raises(ValueError, match="unknown model"):
        model_from_dict({"type": "poisson"})
    with pytest.raises(ValueError):
        model_from_dict([])


def test_sampling_extremes():
    donors = records([5] * 20)
    assert sample_verifiers(Uniform(0.0), donors, 3) == set()
    assert sample_verifiers(Uniform(1.0), donors, 3) == {r.donor_id for r in donors}
    assert sample_verifiers(Uniform(0.5), [], 3) == set()


def test_sampling_ignores_donor_order():
    donors = records(range(1, 41))
    m = Exponential(0.05)
    assert sample_verifiers(m, donors, 11) == sample_verifiers(m, donors[::-1], 11)
    # a donor's choice does not depend on who else is listed
    full = sample_verifiers(m, donors, 11)
    half = sample_verifiers(m, donors[:20], 11)
    assert half == {d for d in full if int(d[1:]) < 20}


def test_sampling_frequency():
    donors = records([1] * 2000)
    hits = sum(len(sample_verifiers(Uniform(0.3), donors, s)) for s in range(20))
    n = 2000 * 20
    assert abs(hits / n - 0.3) < 4 * math.sqrt(0.3 * 0.7 / n)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**63), st.lists(st.text(min_size=1, max_size=8), min_size=1, max_size=10, unique=True))
def test_uniforms_in_unit_interval(seed, ids):
    u = _rng.uniforms(_rng.seed_keys([seed]), _rng.donor_keys(ids))
    assert u.shape == (1, len(ids))
    assert ((u >= 0) & (u < 1)).all()


def test_trial_seeds_match_scalar():
    arr = _rng.trial_seeds(5, 0, 10)
    assert [int(x) for x in arr] == [_rng.trial_seed(5, i) for i in range(10)]
    assert len(set(int(x) for x in arr)) == 10
