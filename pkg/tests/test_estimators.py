from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brownexit.errors import DivergentMoment, TooFewSamples
from brownexit.estimators import (MomentAccumulator, _exact_sums, burkholder_check, default_k, estimate_moment,
                                  hill_tail_index, moment_sweep)
from brownexit.geometry import Disk, HalfPlane
from brownexit.sampler import ExitBatch, sample_exits


def _batch(times, censored=None, start=0):
    t = np.asarray(times, dtype=float)
    n = t.size
    code = np.zeros(n, dtype=int) if censored is None else np.where(censored, 2, 0)
    return ExitBatch(np.arange(start, start + n), t, np.ones(n, dtype=complex), np.ones(n), np.ones(n), code,
                     np.ones(n, dtype=int))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1e300, allow_nan=False, allow_infinity=False) | st.floats(0, 1e-300), min_size=1,
                max_size=50))
def test_exact_sums_match_fractions(vals):
    arr = np.array(vals)
    got = _exact_sums(arr, np.zeros(arr.size, dtype=int), 1)[0]
    assert Fraction(got, 2 ** 1126) == sum(Fraction(v) for v in vals)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000), cuts=st.lists(st.integers(1, 599), min_size=1, max_size=5),
       p=st.sampled_from([0.0, 0.3, 1.0, 2.5]))
def test_merge_is_split_and_order_invariant(seed, cuts, p):
    t = np.random.default_rng(seed).pareto(1.5, 600) + 1e-3
    b = _batch(t)
    whole = MomentAccumulator(p).add(b).result(tail_index=math.inf)
    edges = [0] + sorted(set(cuts)) + [600]
    parts = [MomentAccumulator(p).add(b.take(np.arange(a, c))) for a, c in zip(edges[:-1], edges[1:])]
    fwd = parts[0]
    for q in parts[1:]:
        fwd = fwd.merge(q)
    rev = parts[-1]
    for q in reversed(parts[:-1]):
        rev = q.merge(rev)
    for acc in (fwd, rev):
        r = acc.result(tail_index=math.inf)
        assert (r.mean, r.std_err, r.ci95) == (whole.mean, whole.std_err, whole.ci95)


def test_p_zero_is_one_and_ci_contains_mean():
    b = sample_exits(Disk(), 0j, 2_000, rng=1)
    e = estimate_moment(b, 0.0)
    assert e.mean == 1.0 and e.std_err == 0.0
    e = estimate_moment(b, 1.0)
    assert e.ci95[0] <= e.mean <= e.ci95[1]
    assert e.ci95[0] < 0.5 < e.ci95[1]


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        estimate_moment(_batch(np.ones(50)), 1.0)
    with pytest.raises(TooFewSamples):
        hill_tail_index(_batch(np.arange(1, 300.0)))
    with pytest.raises(ValueError):
        estimate_moment(_batch(np.ones(200)), -1.0)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 2.0])
def test_hill_recovers_pareto_index(alpha):
    u = np.random.default_rng(7).uniform(size=100_000)
    t = u ** (-1.0 / alpha)
    est = hill_tail_index(_batch(t), rng=3)
    assert est.k == default_k(100_000)
    assert est.index == pytest.approx(alpha, rel=0.06)
    assert est.ci95[0] <= est.index <= est.ci95[1]


def test_hill_censoring_adjustment():
    t = np.random.default_rng(2).uniform(size=20_000) ** -2.0  # index 1/2
    cut = np.quantile(t, 0.995)
    cens = t > cut
    est = hill_tail_index(_batch(np.minimum(t, cut), cens), rng=0)
    assert est.censored_in_top == int(cens.sum())
    assert est.index == pytest.approx(est.raw_index * (est.k - est.censored_in_top) / est.k)


def test_divergence_flags():
    t = np.random.default_rng(5).uniform(size=20_000) ** -1.0  # index 1
    b = _batch(t)
    assert not estimate_moment(b, 0.5, tail_index=1.0).divergent_flag
    assert estimate_moment(b, 0.8, tail_index=1.0).divergent_flag
    cens = np.zeros(t.size, dtype=bool)
    cens[:30] = True  # 0.15% censored
    assert estimate_moment(_batch(t, cens), 0.1, tail_index=math.inf).divergent_flag


def test_sweep_on_disk_and_csv(tmp_path):
    s = moment_sweep(Disk(), 0j, [0.5, 1.0, 2.0], 20_000, rng=4)
    assert s.flagged() == [] and s.first_flagged is None
    assert s[1].mean == pytest.approx(0.5, rel=0.02)
    assert s[2].mean == pytest.approx(0.375, rel=0.03)
    s.write_csv(tmp_path / "s.csv", {"seed": 4})
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# seed=4"
    assert lines[1] == "p,mean,std_err,ci_lo,ci_hi,censored,divergent_flag"
    with pytest.raises(ValueError):
        moment_sweep(Disk(), 0j, [1.0, 0.5], 1_000)


def test_half_plane_tail_and_flags():
    s = moment_sweep(HalfPlane(0j, 0.0), 1 + 0j, [0.2, 0.3, 0.45], 50_000, rng=2)
    assert s.tail.index == pytest.approx(0.5, abs=0.05)
    assert s.flagged() == [0.45]


def test_burkholder_sandwich_half_plane():
    b = sample_exits(HalfPlane(0j, 0.0), 1 + 0j, 20_000, rng=3)
    rep = burkholder_check(b, 0.2, 1 + 0j)
    assert rep.bt_within_mid and rep.bt <= rep.mid_hi
    assert rep.mid_lo <= rep.mid_hi
    assert 0.01 < rep.ratios["mid_lo/lhs"] < 100
    with pytest.raises(DivergentMoment):
        burkholder_check(b, 0.45, 1 + 0j)
