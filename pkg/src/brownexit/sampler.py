"""Exit samples of planar Brownian motion.

Two engines share one output format:

``wos``
    Walk-on-spheres.  Each jump lands uniformly on the largest safe circle
    and adds ``rho**2`` times an exact draw of the unit-disk exit time, so
    exit *times* (not just positions) are exact up to the absorbing shell.
``euler``
    Fixed-step Gaussian increments; exit is the first step found outside.

Brownian time is normalised so each coordinate has variance ``t``
(generator ``Laplacian / 2``); the unit disk then has mean exit time 1/2.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import MaxStepsExceeded, NotNested, PointOutsideDomain
from .geometry import Domain
from .rng import STREAM_EULER, STREAM_WOS, Stream, as_stream

SHELL_ABSORBED = "shell-absorbed"
STEP_EXITED = "step-exited"
ESCAPED = "escaped-to-cap"
_CODES = {0: SHELL_ABSORBED, 1: STEP_EXITED, 2: ESCAPED}

J01 = float(special.jn_zeros(0, 1)[0])


# ---------------------------------------------------------------------------
# unit-disk exit time

@lru_cache(maxsize=None)
def _disk_table(n_zeros: int = 300, t_lo: float = 0.004, t_hi: float = 6.0, n_grid: int = 40001):
    j = special.jn_zeros(0, n_zeros)
    coef = 2.0 / (j * special.j1(j))
    t = np.linspace(t_lo, t_hi, n_grid)
    surv = np.empty_like(t)
    for start in range(0, n_grid, 4000):
        tt = t[start:start + 4000, None]
        surv[start:start + 4000] = (coef * np.exp(-0.5 * j * j * tt)).sum(axis=1)
    surv = np.minimum(np.maximum.accumulate(surv[::-1])[::-1], 1.0)
    surv[0] = 1.0
    return t, surv, float(coef[0]), float(0.5 * j[0] ** 2)


def disk_exit_survival(t):
    """``P(T > t)`` for the unit disk started at its centre (Bessel series)."""
    t = np.asarray(t, dtype=float)
    j = special.jn_zeros(0, 300)
    coef = 2.0 / (j * special.j1(j))
    tt = np.maximum(t, 1e-3)[..., None]
    s = (coef * np.exp(-0.5 * j * j * tt)).sum(axis=-1)
    return np.where(t <= 0, 1.0, np.clip(s, 0.0, 1.0))


def disk_exit_quantile(v):
    """Exit time with survival probability ``v`` (inverse CDF in the survival variable)."""
    t, surv, c1, lam = _disk_table()
    v = np.asarray(v, dtype=float)
    body = np.interp(v, surv[::-1], t[::-1])
    tail = t[-1] + np.log(surv[-1] / np.minimum(v, surv[-1])) / lam
    return np.where(v < surv[-1], tail, body)


def sample_unit_disk_exit_time(rng, n: int | None = None, first_index: int = 0, step: int = 0):
    """Draw unit-disk exit times from the counter-based stream ``rng``."""
    st = as_stream(rng)
    size = 1 if n is None else n
    idx = np.arange(first_index, first_index + size, dtype=np.uint64)
    _, v = st.uniforms(idx, step)
    out = disk_exit_quantile(v)
    return float(out[0]) if n is None else out


# ---------------------------------------------------------------------------
# configuration and results

@dataclass(frozen=True)
class SamplerConfig:
    eps_shell: float = 1e-6
    max_steps: int = 10_000_000
    modulus_cap: float = 1e6
    engine: str = "wos"
    step_size: float = 1e-3
    block: int = 64

    def __post_init__(self):
        if not self.eps_shell > 0:
            raise ValueError("eps_shell must be positive")
        if not (math.isfinite(self.modulus_cap) and self.modulus_cap > 0):
            raise ValueError("modulus_cap must be finite and positive")
        if self.engine not in ("wos", "euler"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.engine == "euler" and not self.step_size > 0:
            raise ValueError("euler step size must be positive")

    def as_dict(self) -> dict:
        return {"eps_shell": self.eps_shell, "max_steps": self.max_steps,
                "modulus_cap": self.modulus_cap, "engine": self.engine,
                "step_size": self.step_size}


@dataclass
class PathState:
    position: complex
    elapsed: float = 0.0
    max_mod_lo: float = 0.0
    max_mod_hi: float = 0.0
    steps: int = 0


@dataclass(frozen=True)
class ExitSample:
    exit_time: float
    exit_point: complex
    max_mod_lo: float
    max_mod_hi: float
    termination: str
    steps: int

    @property
    def censored(self) -> bool:
        return self.termination == ESCAPED


@dataclass
class ExitBatch:
    """Struct-of-arrays for many exit samples, indexed by logical sample index."""

    index: np.ndarray
    exit_time: np.ndarray
    exit_point: np.ndarray
    max_mod_lo: np.ndarray
    max_mod_hi: np.ndarray
    code: np.ndarray
    steps: np.ndarray
    start: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.exit_time)

    @property
    def censored(self) -> np.ndarray:
        return self.code == 2

    @property
    def n_censored(self) -> int:
        return int(np.count_nonzero(self.code == 2))

    def sample(self, i: int) -> ExitSample:
        return ExitSample(float(self.exit_time[i]), complex(self.exit_point[i]),
                          float(self.max_mod_lo[i]), float(self.max_mod_hi[i]),
                          _CODES[int(self.code[i])], int(self.steps[i]))

    def samples(self) -> list[ExitSample]:
        return [self.sample(i) for i in range(len(self))]

    def take(self, sel) -> "ExitBatch":
        return ExitBatch(self.index[sel], self.exit_time[sel], self.exit_point[sel],
                         self.max_mod_lo[sel], self.max_mod_hi[sel], self.code[sel],
                         self.steps[sel], None if self.start is None else self.start[sel])

    @classmethod
    def concat(cls, parts) -> "ExitBatch":
        parts = list(parts)
        starts = None
        if all(p.start is not None for p in parts):
            starts = np.concatenate([p.start for p in parts])
        return cls(*(np.concatenate([getattr(p, k) for p in parts])
                     for k in ("index", "exit_time", "exit_point", "max_mod_lo",
                               "max_mod_hi", "code", "steps")), start=starts)

    @classmethod
    def from_samples(cls, samples) -> "ExitBatch":
        samples = list(samples)
        inv = {v: k for k, v in _CODES.items()}
        return cls(np.arange(len(samples)),
                   np.array([s.exit_time for s in samples], dtype=float),
                   np.array([s.exit_point for s in samples], dtype=complex),
                   np.array([s.max_mod_lo for s in samples], dtype=float),
                   np.array([s.max_mod_hi for s in samples], dtype=float),
                   np.array([inv[s.termination] for s in samples], dtype=int),
                   np.array([s.steps for s in samples], dtype=int))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_index", "exit_time", "exit_re", "exit_im", "maxmod_lo",
                        "maxmod_hi", "steps", "termination"])
            for i in range(len(self)):
                z = self.exit_point[i]
                w.writerow([int(self.index[i]), repr(float(self.exit_time[i])), repr(float(z.real)),
                            repr(float(z.imag)), repr(float(self.max_mod_lo[i])),
                            repr(float(self.max_mod_hi[i])), int(self.steps[i]),
                            _CODES[int(self.code[i])]])


def as_batch(samples) -> ExitBatch:
    if isinstance(samples, ExitBatch):
        return samples
    return ExitBatch.from_samples(samples)


# ---------------------------------------------------------------------------
# engines

def _wos(domain: Domain, start, index, cfg: SamplerConfig, st: Stream) -> ExitBatch:
    n = len(index)
    pos = np.broadcast_to(np.asarray(start, dtype=complex), (n,)).copy()
    start_arr = pos.copy()
    if not np.all(domain._contains(pos)):
        raise PointOutsideDomain("start point must lie inside the domain")
    elapsed = np.zeros(n)
    lo = np.abs(pos)
    hi = lo.copy()
    steps = np.zeros(n, dtype=np.int64)
    code = np.full(n, -1, dtype=np.int64)
    exit_pt = np.zeros(n, dtype=complex)

    act = np.arange(n)
    p, el, l, h, sc = pos, elapsed, lo, hi, steps
    idx = np.asarray(index, dtype=np.uint64)
    while act.size:
        rho = np.maximum(domain._dist(p), 0.0)
        mod = np.abs(p)
        shell = rho < cfg.eps_shell * np.maximum(mod, 1.0)
        escape = ~shell & (mod > cfg.modulus_cap)
        done = shell | escape
        if np.any(done):
            ds = np.flatnonzero(shell)
            if ds.size:
                q = domain._project(p[ds])
                ex = act[ds]
                exit_pt[ex] = q
                code[ex] = 0
                l[ds] = np.maximum(l[ds], np.abs(q))
                h[ds] = np.maximum(h[ds], np.maximum(mod[ds] + rho[ds], np.abs(q)))
            de = np.flatnonzero(escape)
            if de.size:
                exit_pt[act[de]] = p[de]
                code[act[de]] = 2
            fin = act[done]
            elapsed[fin], lo[fin], hi[fin], steps[fin] = el[done], l[done], h[done], sc[done]
            keep = ~done
            act, p, el, l, h, sc, rho, mod = (act[keep], p[keep], el[keep], l[keep], h[keep],
                                              sc[keep], rho[keep], mod[keep])
            if not act.size:
                break
        if sc.max() >= cfg.max_steps:
            raise MaxStepsExceeded(f"walk-on-spheres exceeded {cfg.max_steps} steps")
        u, v = st.uniforms(idx[act], sc)
        h = np.maximum(h, mod + rho)
        p = p + rho * np.exp(2j * math.pi * u)
        el = el + rho * rho * disk_exit_quantile(v)
        l = np.maximum(l, np.abs(p))
        sc = sc + 1
    return ExitBatch(np.asarray(index), elapsed, exit_pt, lo, hi, code, steps, start_arr)


def _euler(domain: Domain, start, index, cfg: SamplerConfig, st: Stream) -> ExitBatch:
    n = len(index)
    pos = np.broadcast_to(np.asarray(start, dtype=complex), (n,)).copy()
    start_arr = pos.copy()
    if not np.all(domain._contains(pos)):
        raise PointOutsideDomain("start point must lie inside the domain")
    sd = math.sqrt(cfg.step_size)
    m = cfg.block
    elapsed = np.zeros(n)
    lo = np.abs(pos)
    steps = np.zeros(n, dtype=np.int64)
    code = np.full(n, -1, dtype=np.int64)
    exit_pt = np.zeros(n, dtype=complex)
    idx = np.asarray(index, dtype=np.uint64)
    act = np.arange(n)
    p, l = pos, lo.copy()
    base = 0
    offs = np.arange(m, dtype=np.uint64)
    while act.size:
        if base >= cfg.max_steps:
            raise MaxStepsExceeded(f"euler engine exceeded {cfg.max_steps} steps")
        g1, g2 = st.normals(idx[act][:, None], np.uint64(base) + offs[None, :])
        path = p[:, None] + sd * np.cumsum(g1 + 1j * g2, axis=1)
        mods = np.abs(path)
        out = ~domain._contains(path.ravel()).reshape(path.shape) | (mods > cfg.modulus_cap)
        hit = out.any(axis=1)
        first = np.where(hit, out.argmax(axis=1), m - 1)
        cols = np.arange(m)[None, :]
        upto = np.where(cols <= first[:, None], mods, 0.0)
        l = np.maximum(l, upto.max(axis=1))
        if np.any(hit):
            rows = np.flatnonzero(hit)
            fin = act[rows]
            zf = path[rows, first[rows]]
            esc = np.abs(zf) > cfg.modulus_cap
            exit_pt[fin] = np.where(esc, zf, domain._project(zf))
            code[fin] = np.where(esc, 2, 1)
            steps[fin] = base + first[rows] + 1
            elapsed[fin] = steps[fin] * cfg.step_size
            lo[fin] = l[rows]
        keep = ~hit
        act, p, l = act[keep], path[keep, -1], l[keep]
        base += m
    return ExitBatch(np.asarray(index), elapsed, exit_pt, lo, lo.copy(), code, steps, start_arr)


def sample_exits(domain: Domain, start, n: int, config: SamplerConfig | None = None,
                 rng=None, first_index: int = 0, workers: int = 1,
                 chunk: int = 50_000) -> ExitBatch:
    """``n`` exit samples with logical indices ``first_index .. first_index+n-1``.

    ``start`` is a point or an array of ``n`` points.  Output depends only on
    ``(rng seed, stream, indices)``, never on ``workers`` or ``chunk``.
    """
    cfg = config or SamplerConfig()
    default_stream = STREAM_WOS if cfg.engine == "wos" else STREAM_EULER
    st = as_stream(rng, default_stream)
    start = np.asarray(start, dtype=complex)
    if start.ndim and start.shape[0] != n:
        raise ValueError("start array must have one point per sample")
    bounds = list(range(first_index, first_index + n, chunk)) + [first_index + n]
    jobs = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        s = start if start.ndim == 0 else start[a - first_index:b - first_index]
        jobs.append((domain, s, a, b, cfg, st.seed, st.stream, st.offset))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk_rebased, jobs))
    else:
        parts = [_run_chunk_rebased(j) for j in jobs]
    if not parts:
        empty = np.zeros(0)
        return ExitBatch(np.zeros(0, dtype=int), empty, empty.astype(complex), empty, empty,
                         np.zeros(0, dtype=int), np.zeros(0, dtype=int))
    return ExitBatch.concat(parts)


def _run_chunk_rebased(args):
    domain, s, a, b, cfg, seed, stream, offset = args
    st = Stream(seed, stream, offset)
    eng = _wos if cfg.engine == "wos" else _euler
    return eng(domain, s, np.arange(a, b), cfg, st)


def sample_exit(domain: Domain, start, config: SamplerConfig | None = None, rng=None,
                index: int = 0) -> ExitSample:
    """One exit sample; identical to entry ``index`` of a batch run."""
    return sample_exits(domain, start, 1, config, rng, first_index=index).sample(0)


def coupled_exit_pair(inner: Domain, outer: Domain, start, config: SamplerConfig | None = None,
                      rng=None, n: int = 1, first_index: int = 0):
    """Euler paths driven by shared increments through nested domains.

    Returns ``(inner_batch, outer_batch)``.  Raises ``NotNested`` when a path
    leaves ``outer`` while still inside ``inner``.
    """
    cfg = config or SamplerConfig(engine="euler")
    st = as_stream(rng, STREAM_EULER)
    pos0 = complex(start)
    if not inner.contains(pos0):
        raise PointOutsideDomain("start must lie inside the inner domain")
    sd = math.sqrt(cfg.step_size)
    m = cfg.block
    idx = np.arange(first_index, first_index + n, dtype=np.uint64)
    res = {}
    for key in ("inner", "outer"):
        res[key] = dict(steps=np.zeros(n, dtype=np.int64), code=np.full(n, -1),
                        pt=np.zeros(n, dtype=complex), lo=np.full(n, abs(pos0)))
    act = np.arange(n)
    p = np.full(n, pos0)
    inner_done = np.zeros(n, dtype=bool)
    lo = np.full(n, abs(pos0))
    base = 0
    offs = np.arange(m, dtype=np.uint64)
    while act.size:
        if base >= cfg.max_steps:
            raise MaxStepsExceeded(f"coupled engine exceeded {cfg.max_steps} steps")
        g1, g2 = st.normals(idx[act][:, None], np.uint64(base) + offs[None, :])
        path = p[:, None] + sd * np.cumsum(g1 + 1j * g2, axis=1)
        flat = path.ravel()
        mods = np.abs(path)
        capped = mods > cfg.modulus_cap
        in_i = inner._contains(flat).reshape(path.shape)
        in_o = outer._contains(flat).reshape(path.shape)
        if np.any(in_i & ~in_o):
            raise NotNested("a point inside the inner domain lies outside the outer domain")
        out_i = ~in_i | capped
        out_o = ~in_o | capped
        cols = np.arange(m)[None, :]
        # inner exits (only for rows not already exited)
        hit_i = out_i.any(axis=1) & ~inner_done[act]
        fi = out_i.argmax(axis=1)
        for rows in (np.flatnonzero(hit_i),):
            if rows.size:
                r = res["inner"]
                g = act[rows]
                zf = path[rows, fi[rows]]
                esc = np.abs(zf) > cfg.modulus_cap
                r["steps"][g] = base + fi[rows] + 1
                r["code"][g] = np.where(esc, 2, 1)
                r["pt"][g] = np.where(esc, zf, inner._project(zf))
                upto = np.where(cols <= fi[rows][:, None], mods[rows], 0.0).max(axis=1)
                r["lo"][g] = np.maximum(lo[rows], upto)
                inner_done[g] = True
        hit_o = out_o.any(axis=1)
        fo = np.where(hit_o, out_o.argmax(axis=1), m - 1)
        lo = np.maximum(lo, np.where(cols <= fo[:, None], mods, 0.0).max(axis=1))
        rows = np.flatnonzero(hit_o)
        if rows.size:
            r = res["outer"]
            g = act[rows]
            zf = path[rows, fo[rows]]
            esc = np.abs(zf) > cfg.modulus_cap
            r["steps"][g] = base + fo[rows] + 1
            r["code"][g] = np.where(esc, 2, 1)
            r["pt"][g] = np.where(esc, zf, outer._project(zf))
            r["lo"][g] = lo[rows]
        keep = ~hit_o
        act, p, lo = act[keep], path[keep, -1], lo[keep]
        base += m
    out = []
    for key in ("inner", "outer"):
        r = res[key]
        out.append(ExitBatch(idx.astype(np.int64), r["steps"] * cfg.step_size, r["pt"], r["lo"],
                             r["lo"].copy(), r["code"], r["steps"], np.full(n, pos0)))
    return out[0], out[1]
