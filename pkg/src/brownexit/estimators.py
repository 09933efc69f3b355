"""Moment, tail-index and Burkholder-sandwich estimators over exit samples."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DivergentMoment, TooFewSamples
from .rng import STREAM_BOOTSTRAP
from .sampler import ExitBatch, SamplerConfig, as_batch, sample_exits

N_BATCHES = 32
CENSOR_FRACTION = 1e-3
TAIL_SAFETY = 0.8
MIN_SAMPLES = 100

# Exact sums: every double is m * 2**e with integer m; sums are kept as
# Python ints in units of 2**_BASE so that merging is exactly associative.
_BASE = -1126


def _exact_sums(values: np.ndarray, groups: np.ndarray, n_groups: int) -> list[int]:
    out = [0] * n_groups
    if values.size == 0:
        return out
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite value in moment sum")
    frac, expo = np.frexp(values)
    mant = np.ldexp(frac, 53).astype(np.int64)
    expo = expo.astype(np.int64) - 53 - _BASE
    hi, lo = mant >> 26, mant & ((1 << 26) - 1)
    keys = groups.astype(np.int64) * 4096 + expo
    uniq, inv = np.unique(keys, return_inverse=True)
    hs = np.zeros(uniq.size, dtype=np.int64)
    ls = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(hs, inv, hi)
    np.add.at(ls, inv, lo)
    for key, h, l in zip(uniq.tolist(), hs.tolist(), ls.tolist()):
        g, e = divmod(key, 4096)
        out[g] += ((h << 26) + l) << e
    return out


@dataclass(frozen=True)
class TailIndexEstimate:
    k: int
    index: float
    ci95: tuple[float, float]
    raw_index: float = float("nan")
    censored_in_top: int = 0


@dataclass(frozen=True)
class MomentEstimate:
    p: float
    n: int
    mean: float
    std_err: float
    ci95: tuple[float, float]
    censored: int
    divergent_flag: bool
    tail_index: float | None = None

    def row(self) -> list:
        return [self.p, self.mean, self.std_err, self.ci95[0], self.ci95[1], self.censored,
                int(self.divergent_flag)]


@dataclass
class MomentAccumulator:
    """Mergeable fold for ``E[T^p]``.

    Samples are assigned to batches by ``sample_index mod n_batches``; each
    batch keeps an exact integer sum, so any split of a pool into shards and
    any merge order give bit-identical estimates.
    """

    p: float
    n_batches: int = N_BATCHES
    counts: list = field(default=None)
    sums: list = field(default=None)
    censored: int = 0
    times: np.ndarray = field(default=None)
    flags: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            self.counts = [0] * self.n_batches
            self.sums = [0] * self.n_batches
            self.times = np.zeros(0)
            self.flags = np.zeros(0, dtype=bool)

    @property
    def n(self) -> int:
        return sum(self.counts)

    def add(self, samples) -> "MomentAccumulator":
        b = as_batch(samples)
        t = np.asarray(b.exit_time, dtype=float)
        groups = np.asarray(b.index, dtype=np.int64) % self.n_batches
        vals = np.ones_like(t) if self.p == 0 else np.power(t, self.p)
        for g, s in enumerate(_exact_sums(vals, groups, self.n_batches)):
            self.sums[g] += s
        cnt = np.bincount(groups, minlength=self.n_batches)
        for g in range(self.n_batches):
            self.counts[g] += int(cnt[g])
        self.censored += b.n_censored
        self.times = np.concatenate([self.times, t])
        self.flags = np.concatenate([self.flags, b.censored])
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.p != self.p or other.n_batches != self.n_batches:
            raise ValueError("cannot merge accumulators with different p or batching")
        return MomentAccumulator(
            self.p, self.n_batches,
            [a + b for a, b in zip(self.counts, other.counts)],
            [a + b for a, b in zip(self.sums, other.sums)],
            self.censored + other.censored,
            np.concatenate([self.times, other.times]),
            np.concatenate([self.flags, other.flags]))

    def result(self, tail_index: float | None = None, rng=0) -> MomentEstimate:
        n = self.n
        if n < MIN_SAMPLES:
            raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {n}")
        scale = 1 << -_BASE
        mean = sum(self.sums) / (n * scale)
        used = [(c, s) for c, s in zip(self.counts, self.sums) if c]
        nb = len(used)
        if nb > 1:
            bm = np.array([s / (c * scale) for c, s in used])
            w = np.array([c for c, _ in used], dtype=float) / n
            se = math.sqrt(nb / (nb - 1) * float(np.sum(w * w * (bm - mean) ** 2)))
            tq = float(stats.t.ppf(0.975, nb - 1))
        else:
            se, tq = float("nan"), float("nan")
        ci = (mean - tq * se, mean + tq * se) if se == se else (mean, mean)
        if tail_index is None and n >= 10 * 50:
            tail_index = _hill_sorted(*self._sorted(), None, rng).index
        flag = self.censored / n > CENSOR_FRACTION
        if tail_index is not None and self.p >= TAIL_SAFETY * tail_index:
            flag = True
        return MomentEstimate(self.p, n, mean, se, ci, self.censored, bool(flag), tail_index)

    def _sorted(self):
        order = np.lexsort((self.flags, self.times))[::-1]
        return self.times[order], self.flags[order]


def estimate_moment(samples, p: float, tail_index: float | None = None, rng=0) -> MomentEstimate:
    """``E[T^p]`` with a 32-batch-means standard error and divergence flag."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    b = as_batch(samples)
    if len(b) < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {len(b)}")
    return MomentAccumulator(p).add(b).result(tail_index, rng)


def default_k(n: int) -> int:
    return int(min(max(math.floor(n ** (2.0 / 3.0)), 50), n // 10))


def _hill_core(desc: np.ndarray, cens: np.ndarray, k: int):
    logs = np.log(desc[:k]) - math.log(desc[k])
    h = float(np.mean(logs))
    raw = 1.0 / h if h > 0 else float("inf")
    unc = k - int(np.count_nonzero(cens[:k]))
    return raw * unc / k, raw, k - unc


def _hill_sorted(desc, cens, k, rng, n_boot: int = 200) -> TailIndexEstimate:
    n = desc.size
    if k is None:
        k = default_k(n)
    if k < 50 or k > n // 10:
        raise TooFewSamples(f"Hill estimator needs 50 <= k <= n/10 (k={k}, n={n})")
    index, raw, nc = _hill_core(desc, cens, k)
    seed = rng if isinstance(rng, int) else getattr(rng, "seed", 0)
    gen = np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), STREAM_BOOTSTRAP]))
    boots = np.empty(n_boot)
    for i in range(n_boot):
        pick = gen.integers(0, n, n)
        # the top k+1 of a resample, by index into the sorted sample
        sel = np.sort(np.partition(pick, k)[:k + 1])
        boots[i] = _hill_core(desc[sel], cens[sel], k)[0]
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return TailIndexEstimate(k, index, (float(min(lo, index)), float(max(hi, index))), raw, nc)


def hill_tail_index(samples, k: int | None = None, rng=0, n_boot: int = 200) -> TailIndexEstimate:
    """Hill estimate of the exit-time tail index ``a`` in ``P(T > t) ~ t**-a``.

    Censored (escaped) samples enter at their lower-bound times; the index is
    scaled by the uncensored fraction of the top ``k``.
    """
    b = as_batch(samples)
    t = np.asarray(b.exit_time, dtype=float)
    c = np.asarray(b.censored, dtype=bool)
    order = np.lexsort((c, t))[::-1]
    return _hill_sorted(t[order], c[order], k, rng, n_boot)


@dataclass
class SweepResult:
    estimates: list
    tail: TailIndexEstimate | None
    first_flagged: float | None
    batch: ExitBatch | None = None

    def __iter__(self):
        return iter(self.estimates)

    def __len__(self):
        return len(self.estimates)

    def __getitem__(self, i):
        return self.estimates[i]

    def flagged(self) -> list[float]:
        return [e.p for e in self.estimates if e.divergent_flag]

    def write_csv(self, path, header: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for key, val in (header or {}).items():
                fh.write(f"# {key}={val}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["p", "mean", "std_err", "ci_lo", "ci_hi", "censored", "divergent_flag"])
            for e in self.estimates:
                w.writerow([repr(float(x)) if isinstance(x, float) else x for x in e.row()])


def moment_sweep(domain, start, p_grid, budget: int, config: SamplerConfig | None = None,
                 rng=0, samples=None, workers: int = 1) -> SweepResult:
    """Moments over a sorted ``p_grid`` from one shared sample pool."""
    grid = [float(p) for p in p_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("p_grid must be sorted ascending")
    batch = as_batch(samples) if samples is not None else sample_exits(
        domain, start, budget, config, rng, workers=workers)
    tail = hill_tail_index(batch, rng=rng) if len(batch) >= 500 else None
    ti = None if tail is None else tail.index
    ests = [estimate_moment(batch, p, tail_index=ti, rng=rng) for p in grid]
    first = next((e.p for e in ests if e.divergent_flag), None)
    return SweepResult(ests, tail, first, batch)


@dataclass(frozen=True)
class BurkholderReport:
    p: float
    lhs: float
    mid_lo: float
    mid_hi: float
    bt: float
    sigma: dict
    ratios: dict
    bt_within_mid: bool


def burkholder_check(samples, p: float, start, tail_index: float | None = None,
                     rng=0) -> BurkholderReport:
    """Empirical version of the two-sided Burkholder sandwich at exponent ``p``.

    Raises ``DivergentMoment`` unless ``p < 0.8 * tail index``.
    """
    b = as_batch(samples)
    if len(b) < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {len(b)}")
    if tail_index is None:
        tail_index = hill_tail_index(b, rng=rng).index
    if not (0 < p < TAIL_SAFETY * tail_index):
        raise DivergentMoment(f"p={p} is not below {TAIL_SAFETY} x tail index {tail_index:.4g}")
    a2 = abs(complex(start)) ** 2

    def est(vals):
        fake = ExitBatch(b.index, vals, b.exit_point, b.max_mod_lo, b.max_mod_hi,
                         np.zeros(len(b), dtype=int), b.steps)
        e = estimate_moment(fake, 1.0, tail_index=float("inf"))
        return e.mean, e.std_err

    lhs, s_lhs = est(np.power(b.exit_time + a2, p))
    mid_lo, s_lo = est(np.power(b.max_mod_lo, 2 * p))
    mid_hi, s_hi = est(np.power(b.max_mod_hi, 2 * p))
    bt, s_bt = est(np.power(np.abs(b.exit_point), 2 * p))
    ratios = {"mid_lo/lhs": mid_lo / lhs, "mid_hi/lhs": mid_hi / lhs, "bt/mid_hi": bt / mid_hi}
    ok = bt <= mid_hi * (1 + 3 * s_hi / mid_hi) if mid_hi > 0 else bt <= 0
    return BurkholderReport(p, lhs, mid_lo, mid_hi, bt,
                            {"lhs": s_lhs, "mid_lo": s_lo, "mid_hi": s_hi, "bt": s_bt},
                            ratios, bool(ok))
