from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from brownexit.errors import EmptyPlus, GlueHypothesisError
from brownexit.geometry import Disk, HalfPlane, Wedge, boundary_grid
from brownexit.gluing import (CERTIFIED, FAILED_I, FAILED_III, GlueProblem, alternating_exit, check_hypotheses,
                              classify_boundary, clopper_pearson, estimate_boundary_moment, estimate_r, glue,
                              series_bound)
from brownexit.sampler import sample_exits
from brownexit.geometry import Union

QUADRANT = Wedge(math.pi / 4)
RIGHT = HalfPlane(0j, 0.0)
LEFT_OF_ONE = HalfPlane(1 + 0j, math.pi)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 400), frac=st.floats(0, 1))
def test_clopper_pearson_matches_scipy(n, frac):
    k = int(round(frac * n))
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=0.95, method="exact")
    lo, hi = clopper_pearson(k, n)
    assert lo == pytest.approx(ci.low, abs=1e-12)
    assert hi == pytest.approx(ci.high, abs=1e-12)


def test_classify_disk_and_quadrant():
    dv, dw = classify_boundary(Disk(), QUADRANT)
    pts = boundary_grid(dv, 50)
    assert np.allclose(np.abs(pts), 1.0)
    assert np.all(np.abs(np.angle(pts)) < math.pi / 4)
    pts = boundary_grid(dw, 50)
    assert np.all(np.abs(pts) < 1.0)
    assert np.allclose(np.abs(np.angle(pts)), math.pi / 4)


def test_classify_half_planes():
    dv, dw = classify_boundary(RIGHT, LEFT_OF_ONE, cap=100.0)
    assert np.allclose(boundary_grid(dv, 40).real, 0.0, atol=1e-9)
    assert np.allclose(boundary_grid(dw, 40).real, 1.0, atol=1e-9)
    assert dv.truncated and dw.truncated


def test_disjoint_domains():
    with pytest.raises(EmptyPlus):
        classify_boundary(Disk(), Disk(5 + 0j, 1.0))
    with pytest.raises(GlueHypothesisError):
        check_hypotheses(Disk(), Disk(5 + 0j, 1.0))
    with pytest.raises(GlueHypothesisError):
        check_hypotheses(Disk(0j, 0.5), Disk())


def test_r_is_zero_when_dw_plus_is_empty():
    res = estimate_r(GlueProblem(Disk(), Disk(0j, 2.0), 0.5, grid_n=4, budget=100))
    assert res.r_hat == 0.0 and res.r_hi == 0.0


def test_r_for_half_planes_is_one():
    res = estimate_r(GlueProblem(RIGHT, LEFT_OF_ONE, 0.4, grid_n=4, budget=2_000), with_moments=False)
    assert res.r_hat == 1.0
    assert res.r_lo > 0.99


def test_r_disk_quadrant_below_one():
    res = estimate_r(GlueProblem(Disk(), QUADRANT, 0.5, grid_n=8, budget=4_000), with_moments=False)
    assert 0.0 < res.r_hat < res.r_hi < 1.0
    # mid-arc point: the symmetric quadrant gives probability near 1/2
    mid = min(res.table, key=lambda g: abs(g.a - 1))
    assert mid.p_hat == pytest.approx(0.5, abs=0.05)


def test_boundary_moment_precondition():
    from brownexit.errors import DivergentMoment
    dv, _ = classify_boundary(Disk(), RIGHT)
    with pytest.raises(DivergentMoment):
        estimate_boundary_moment(dv, RIGHT, 0.6, budget=200, grid_n=4)
    m = estimate_boundary_moment(dv, RIGHT, 0.3, budget=2_000, grid_n=4)
    assert m.sup > 0 and m.stable is not None and m.refined_sup >= m.sup


def test_series_bound_forms():
    assert series_bound(0.0, 5.0, 2.0, 1.0) == pytest.approx(2.0)
    assert series_bound(0.25, 4.0, 1.0, 2.0) == pytest.approx((1 + 0.5 * 2) / 0.5)
    assert series_bound(0.5, 1.0, 1.0, 0.5) == pytest.approx(((1 + 0.5) / 0.5) ** 2)
    assert series_bound(1.0, 1.0, 1.0, 0.5) == math.inf
    assert series_bound(0.5, math.inf, 1.0, 2.0) == math.inf
    with pytest.raises(ValueError):
        series_bound(1.5, 1.0, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(0, 0.99), dr=st.floats(0, 0.5), mv=st.floats(0, 10), mw=st.floats(0, 10),
       p=st.floats(0.1, 3.0))
def test_series_bound_monotone(r, dr, mv, mw, p):
    base = series_bound(r, mv, mw, p)
    assert series_bound(min(r + dr, 1.0), mv, mw, p) >= base * (1 - 1e-12)
    assert series_bound(r, mv + 1, mw, p) >= base
    assert series_bound(r, mv, mw + 1, p) >= base


def test_alternating_trace_structure():
    prob = GlueProblem(Disk(), QUADRANT, 0.5, seed=3)
    tr = alternating_exit(prob, 1 + 0j, n=500)
    assert len(tr) == 500
    for times, total in zip(tr.times, tr.total):
        flat = [t for pair in times for t in pair if t is not None]
        assert all(b >= a for a, b in zip(flat, flat[1:]))
        assert flat[-1] == pytest.approx(total)
        assert all(pair[1] is not None for pair in times[:-1])  # only the final phase may end the path
    assert np.all(tr.alternations >= 1)
    with pytest.raises(GlueHypothesisError):
        alternating_exit(prob, 0.5 + 0j)


def test_alternating_matches_direct_exit():
    prob = GlueProblem(Disk(), QUADRANT, 0.5, seed=1)
    tr = alternating_exit(prob, 1 + 0j, n=4_000)
    direct = sample_exits(Union((Disk(), QUADRANT)), 1 + 0j, 4_000, rng=1)
    assert stats.ks_2samp(tr.total, direct.exit_time).pvalue > 0.001


def test_glue_verdicts(tmp_path):
    neg = glue(GlueProblem(RIGHT, LEFT_OF_ONE, 0.4, grid_n=4, budget=2_000))
    assert neg.verdict == FAILED_III and neg.series_bound == math.inf
    assert neg.to_dict()["series_bound"] == "infinite"
    bad = glue(GlueProblem(Disk(), RIGHT, 0.6, grid_n=4, budget=1_000))
    assert bad.verdict == FAILED_I
    pos = glue(GlueProblem(Disk(), QUADRANT, 0.5, grid_n=6, budget=3_000))
    assert pos.verdict == CERTIFIED and math.isfinite(pos.series_bound)
    assert pos.bound_form == "p-subadditive"
    pos.write_grid_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "a_re,a_im,p_hat,ci_hi,moment_hat" and len(lines) == 7
