"""Empirical Phragmen-Lindelof checks and the small oracles behind them."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.stats import qmc

from .errors import DiskNotContained, EvaluationFailure, NotInUpperHalfPlane, SpecError
from .geometry import (DEFAULT_CAP, Disk, Domain, HalfPlane, Union, below_critical, boundary_grid,
                       critical_exponent, full_boundary)
from .rng import STREAM_CLOUD, as_stream
from .sampler import SamplerConfig, sample_exits


def log_plus(x):
    """``max(log x, 0)``; ``x`` must be nonnegative."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("log_plus needs x >= 0")
    with np.errstate(divide="ignore"):
        out = np.where(x > 1, np.log(np.where(x > 1, x, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# test functions

class TestFunction:
    __test__ = False  # keep pytest from collecting the class

    def log_abs(self, z):
        raise NotImplementedError

    def __call__(self, z):
        raise NotImplementedError

    def singular_points(self) -> tuple:
        return ()

    def has_cut(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


def _poly(coeffs, z):
    out = np.zeros_like(z, dtype=complex)
    for c in reversed(coeffs):
        out = out * z + c
    return out


@dataclass(frozen=True)
class Constant(TestFunction):
    c: complex = 1.0

    def __call__(self, z):
        return np.full(np.shape(z), complex(self.c))

    def log_abs(self, z):
        with np.errstate(divide="ignore"):
            return np.full(np.shape(z), math.log(abs(self.c)) if self.c != 0 else -np.inf)

    def to_dict(self):
        c = complex(self.c)
        return {"type": "constant", "c": [c.real, c.imag]}


@dataclass(frozen=True)
class Polynomial(TestFunction):
    """Coefficients in ascending order: ``c0 + c1 z + ...``."""

    coefficients: tuple = (0.0, 1.0)

    def __call__(self, z):
        return _poly(self.coefficients, np.asarray(z, dtype=complex))

    def log_abs(self, z):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self(z)))

    def to_dict(self):
        return {"type": "polynomial",
                "coefficients": [[complex(c).real, complex(c).imag] for c in self.coefficients]}


@dataclass(frozen=True)
class ExpPower(TestFunction):
    """``exp(z**gamma)`` with the principal branch of the power."""

    gamma: float = 1.0

    def has_cut(self):
        return float(self.gamma) != int(self.gamma)

    def _power(self, z):
        z = np.asarray(z, dtype=complex)
        if not self.has_cut():
            return z ** int(self.gamma)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.exp(self.gamma * np.log(z))

    def __call__(self, z):
        return np.exp(self._power(z))

    def log_abs(self, z):
        return np.real(self._power(z))

    def to_dict(self):
        return {"type": "exp_power", "gamma": self.gamma}


@dataclass(frozen=True)
class BoundedRational(TestFunction):
    numerator: tuple = (1.0,)
    denominator: tuple = (2.0, 1.0)

    def singular_points(self):
        if len(self.denominator) < 2:
            return ()
        return tuple(complex(r) for r in np.roots(list(reversed(self.denominator))))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return _poly(self.numerator, z) / _poly(self.denominator, z)

    def log_abs(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(_poly(self.numerator, z))) - np.log(np.abs(_poly(self.denominator, z)))

    def to_dict(self):
        return {"type": "bounded_rational",
                "numerator": [[complex(c).real, complex(c).imag] for c in self.numerator],
                "denominator": [[complex(c).real, complex(c).imag] for c in self.denominator]}


def _coeffs(v, what):
    out = []
    for c in v:
        if isinstance(c, (int, float)):
            out.append(complex(c))
        elif isinstance(c, (list, tuple)) and len(c) == 2:
            out.append(complex(float(c[0]), float(c[1])))
        else:
            raise SpecError(f"bad coefficient in {what}: {c!r}")
    if not out:
        raise SpecError(f"{what} must be nonempty")
    return tuple(out)


def function_from_dict(d: dict) -> TestFunction:
    if not isinstance(d, dict) or "type" not in d:
        raise SpecError("function spec must be an object with a 'type' field")
    kind = d["type"]
    try:
        if kind == "constant":
            return Constant(_coeffs([d["c"]], "c")[0])
        if kind == "polynomial":
            return Polynomial(_coeffs(d["coefficients"], "coefficients"))
        if kind == "exp_power":
            return ExpPower(float(d["gamma"]))
        if kind == "bounded_rational":
            return BoundedRational(_coeffs(d["numerator"], "numerator"),
                                   _coeffs(d["denominator"], "denominator"))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad function spec {d!r}: {exc}") from exc
    raise SpecError(f"unknown function type {kind!r}")


# ---------------------------------------------------------------------------
# harmonic measure and the subharmonic mean

def harmonic_measure_halfplane(a) -> float:
    """Harmonic measure of the negative real axis in the upper half-plane, seen from ``a``."""
    a = complex(a)
    if not a.imag > 0:
        raise NotInUpperHalfPlane(f"{a} is not in the upper half-plane")
    return cmath.phase(a) / math.pi


def harmonic_measure_mc(a, n: int = 100_000, config: SamplerConfig | None = None, rng=0,
                        workers: int = 1) -> tuple[float, float]:
    """Monte Carlo fraction of exits with negative real part, and its standard error."""
    a = complex(a)
    if not a.imag > 0:
        raise NotInUpperHalfPlane(f"{a} is not in the upper half-plane")
    b = sample_exits(HalfPlane(0j, math.pi / 2), a, n, config, rng, workers=workers)
    frac = float(np.mean(b.exit_point.real < 0))
    return frac, math.sqrt(max(frac * (1 - frac), 1e-300) / n)


class CircularMean(NamedTuple):
    center: float
    mean: float
    quad_error: float
    holds: bool


def _disk_ok(f: TestFunction, z0: complex, r: float) -> bool:
    for s in f.singular_points():
        if abs(s - z0) <= r:
            return False
    if f.has_cut():
        # cut along (-inf, 0]: the closed disk must miss it
        if z0.real - r <= 0 and abs(z0.imag) <= r:
            if z0.real <= 0 or abs(z0) <= r:
                return False
    return True


def circular_mean_check(f: TestFunction, z0, r: float, n_theta: int = 256, kind: str = "log_plus",
                        tol: float = 1e-12, max_n: int = 1 << 21) -> CircularMean:
    """Center value and circular mean of ``log+|f|`` (or ``log|f|``) on ``|z - z0| = r``.

    The angular rule doubles from ``n_theta`` until successive values agree to
    ``tol``.  ``holds`` reports ``mean >= center - quad_error``.
    """
    z0 = complex(z0)
    if not r > 0:
        raise ValueError("radius must be positive")
    if not _disk_ok(f, z0, r):
        raise DiskNotContained(f"closed disk |z - {z0}| <= {r} leaves the domain of analyticity")

    def u(z):
        la = f.log_abs(z)
        return np.maximum(la, 0.0) if kind == "log_plus" else la

    center = float(u(np.array([z0]))[0])
    n = max(4, int(n_theta))
    prev = float(np.mean(u(z0 + r * np.exp(2j * math.pi * np.arange(n) / n))))
    err = math.inf
    while n < max_n:
        mids = z0 + r * np.exp(2j * math.pi * (np.arange(n) + 0.5) / n)
        cur = 0.5 * (prev + float(np.mean(u(mids))))
        n *= 2
        err = abs(cur - prev)
        prev = cur
        if err <= tol * max(1.0, abs(cur)):
            break
    slack = max(err, 1e-13 * max(1.0, abs(center)))
    return CircularMean(center, prev, err, bool(prev >= center - slack))


# ---------------------------------------------------------------------------
# verify_pl

@dataclass
class PLVerdict:
    K_hat: float
    K_refined: float
    boundary_bounded: bool
    growth_ok: bool
    growth_C: float
    witness_exponent: float
    moment_ok: bool | None
    critical_exponent: float | None
    interior_max: float
    interior_argmax: complex
    conclusion: str
    witness: complex | None = None
    interior_log_max: float = 0.0
    unbounded_witness: bool = False
    cap: float = DEFAULT_CAP
    notes: list = field(default_factory=list)
    cloud: np.ndarray | None = None

    def to_dict(self) -> dict:
        def num(x):
            return x if (x is None or math.isfinite(x)) else ("infinite" if x > 0 else "-infinite")
        return {
            "K_hat": num(self.K_hat), "K_refined": num(self.K_refined),
            "boundary_bounded": self.boundary_bounded, "growth_ok": self.growth_ok,
            "growth_C": num(self.growth_C), "witness_exponent": num(self.witness_exponent),
            "moment_ok": self.moment_ok, "critical_exponent": num(self.critical_exponent),
            "interior_max": num(self.interior_max), "interior_log_max": self.interior_log_max,
            "interior_argmax": [self.interior_argmax.real, self.interior_argmax.imag],
            "conclusion": self.conclusion,
            "witness": None if self.witness is None else [self.witness.real, self.witness.imag],
            "unbounded_witness": self.unbounded_witness, "cap": self.cap, "notes": self.notes,
        }


def _extent(domain: Domain) -> float:
    if isinstance(domain, Disk):
        return abs(domain.center) + domain.radius
    if isinstance(domain, Union) and all(isinstance(m, Disk) for m in domain.members):
        return max(abs(m.center) + m.radius for m in domain.members)
    return math.inf


def _cloud(domain: Domain, n: int, radius: float, seed: int, rmin: float = 1e-3) -> np.ndarray:
    """Scrambled-Sobol cloud, log-uniform in modulus, filtered to the domain."""
    sob = qmc.Sobol(d=2, scramble=True, seed=np.random.default_rng([seed, STREAM_CLOUD]))
    pts = []
    have = 0
    for _ in range(12):
        m = 1 << max(6, math.ceil(math.log2(max(4 * n, 64))))
        u = sob.random(m)
        if math.isfinite(_extent(domain)):
            mod = radius * np.sqrt(u[:, 0])
            z = (domain.center if isinstance(domain, Disk) else 0) + mod * np.exp(2j * math.pi * u[:, 1])
        else:
            mod = np.exp(math.log(rmin) + u[:, 0] * (math.log(radius) - math.log(rmin)))
            z = mod * np.exp(2j * math.pi * u[:, 1])
        z = z[domain._contains(z)]
        pts.append(z)
        have += z.size
        if have >= n:
            break
    z = np.concatenate(pts)[:n]
    if z.size == 0:
        raise EvaluationFailure("interior cloud is empty")
    return z


def _safe_log_abs(f: TestFunction, z):
    la = np.asarray(f.log_abs(z), dtype=float)
    if np.any(np.isnan(la)) or np.any(la == np.inf):
        bad = np.asarray(z)[np.isnan(la) | (la == np.inf)][0]
        raise EvaluationFailure(f"cannot evaluate {f!r} at {bad}")
    return la


def _touches_cut(f: TestFunction, domain: Domain, cap: float) -> bool:
    if not f.has_cut():
        return False
    probe = -np.concatenate([[0.0], np.geomspace(1e-6, cap, 400)]).astype(complex)
    return bool(np.any(domain._contains(probe)))


def _boundary_logs(f, domain, bpts, eps):
    dirs = np.exp(2j * math.pi * np.arange(16) / 16)
    scale = np.maximum(eps, 1e-12 * np.abs(bpts))
    cand = bpts[:, None] + scale[:, None] * dirs[None, :]
    inside = domain._contains(cand.ravel()).reshape(cand.shape)
    la = np.full(cand.shape, -np.inf)
    if np.any(inside):
        la[inside] = _safe_log_abs(f, cand[inside])
    return la.max(axis=1)


def _shell_max(mod, vals, edges):
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (mod >= lo) & (mod < hi)
        out.append(vals[sel].max() if np.any(sel) else np.nan)
    return np.array(out)


def verify_pl(f: TestFunction, domain: Domain, p: float, tol: float = 1e-3,
              n_boundary: int = 4096, n_interior: int = 20_000, cap: float = 1e3,
              eps: float = 1e-6, seed: int = 0, keep_cloud: bool = False) -> PLVerdict:
    """Check the hypotheses and conclusion of the Phragmen-Lindelof bound on samples.

    ``K_hat`` is the largest ``|f|`` at distance ``eps`` inside the
    (cap-truncated) boundary, re-measured at ``eps / 2``.  The growth
    hypothesis ``log+|f| <= C |z|**(2p) + C`` is fitted on modulus shells of a
    quasi-random interior cloud; it holds when the per-shell minimal ``C``
    stops increasing.  The moment hypothesis is ``p`` below the critical
    exponent of ``domain``.
    """
    notes = []
    if _touches_cut(f, domain, cap):
        raise EvaluationFailure("function branch cut meets the domain")
    sing = np.array(f.singular_points(), dtype=complex)
    on_boundary = False
    if sing.size:
        if np.any(domain._contains(sing)):
            raise EvaluationFailure("function has a pole inside the domain")
        ring = sing[:, None] + 1e-9 * np.maximum(1.0, np.abs(sing))[:, None] * np.exp(
            2j * math.pi * np.arange(16) / 16)[None, :]
        on_boundary = bool(np.any(domain._contains(ring.ravel())))
    ext = _extent(domain)
    radius = min(cap, ext) if math.isfinite(ext) else cap
    bseg = full_boundary(domain, cap=radius if math.isfinite(ext) else cap)
    bpts = boundary_grid(bseg, n_boundary, margin=0.0)
    b1 = _boundary_logs(f, domain, bpts, eps)
    b2 = _boundary_logs(f, domain, bpts, eps / 2)
    # limsup toward the boundary: first-order extrapolation eps -> 0, pointwise
    with np.errstate(invalid="ignore"):
        b0 = np.where(np.isfinite(b1) & np.isfinite(b2), 2 * b2 - b1, np.maximum(b1, b2))
    with np.errstate(over="ignore"):
        K1, K2 = float(np.exp(b1.max())), float(np.exp(b2.max()))
    with np.errstate(over="ignore"):
        K_hat = math.inf if on_boundary else float(np.exp(b0.max()))
    if abs(K1 - K2) > tol * max(1.0, K1, K2):
        notes.append("boundary estimate not stable under eps refinement")
    bmod = np.abs(bpts)
    boundary_bounded = not on_boundary
    if on_boundary:
        notes.append("pole on the boundary")
    if not math.isfinite(ext):
        edges = np.geomspace(max(bmod.min(), 1e-3), bmod.max() * (1 + 1e-12), 9)
        sm = _shell_max(bmod, b0, edges)
        sm = sm[np.isfinite(sm)]
        if sm.size >= 4:
            inner, outer = sm[: sm.size // 2].max(), sm[sm.size // 2:]
            boundary_bounded = on_boundary is False and bool(
                outer.max() <= inner + math.log1p(tol) or not np.all(np.diff(outer) > 0))
    if not boundary_bounded and not on_boundary:
        notes.append("boundary values grow with the modulus")

    log_k = math.log(K_hat) if K_hat > 0 else -math.inf
    z = _cloud(domain, n_interior, radius, seed)
    la = _safe_log_abs(f, z)
    lp = np.maximum(la, 0.0)
    mod = np.abs(z)
    cvals = lp / (mod ** (2 * p) + 1.0)
    growth_C = float(cvals.max())
    witness_exponent = 0.0
    growth_ok = True
    unbounded = False
    if not math.isfinite(ext):
        edges = np.geomspace(max(mod.min(), 1.0), mod.max() * (1 + 1e-12), 13)
        cs = _shell_max(mod, cvals, edges)
        lm = _shell_max(mod, lp, edges)
        good = np.isfinite(cs)
        cs, lmx, mids = cs[good], lm[good], np.sqrt(edges[:-1] * edges[1:])[good]
        half = cs.size // 2
        if cs.size >= 4:
            growth_ok = bool(cs[half:].max() <= cs[:half].max() * (1 + tol) + 1e-12)
            pos = lmx[half:] > 0
            if np.count_nonzero(pos) >= 2:
                witness_exponent = float(np.polyfit(np.log(mids[half:][pos]),
                                                    np.log(lmx[half:][pos]), 1)[0])
            unbounded = bool(np.all(np.diff(lmx[half:]) > 0) and lmx[-1] > log_k + 1)
    pstar = critical_exponent(domain)
    moment_ok = None if pstar is None else below_critical(p, pstar)
    if pstar is None:
        notes.append("critical exponent unknown for this domain")

    j = int(np.argmax(la))
    interior_max = float(np.exp(la[j])) if la[j] < 700 else math.inf
    argmax = complex(z[j])
    witness = None
    if not (boundary_bounded and growth_ok and moment_ok):
        conclusion = "hypothesis-unmet"
        if la[j] > log_k + math.log1p(tol):
            witness = argmax
    elif la[j] > log_k + math.log1p(tol):
        conclusion = "violated"
        witness = argmax
    else:
        conclusion = "bound-holds"
    if not math.isfinite(ext):
        notes.append(f"growth and boundary checked up to modulus {radius:g}")
    return PLVerdict(K_hat, K2, boundary_bounded, growth_ok, growth_C, witness_exponent,
                     moment_ok, pstar, interior_max, argmax, conclusion, witness, float(la[j]),
                     unbounded, radius, notes, z if keep_cloud else None)
