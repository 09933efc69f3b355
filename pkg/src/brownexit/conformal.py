"""Explicit conformal maps of the unit disk and Hardy-norm quadrature.

Each map knows its *anchors*: boundary points where it is singular.  Near an
anchor ``u`` every node is written ``z = u (1 - d)`` with ``d`` small and
computed without cancellation, and the map evaluates ``log|f|`` directly
from ``d``.  That keeps the circular means accurate at radii
``r = 1 - 2**-40``, where ``1 - z`` is far below double resolution of ``z``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import BranchPole, DivergentMoment, QuadratureStall, SpecError
from .geometry import Domain, critical_exponent
from .rng import STREAM_IMAGE, as_stream

K_MAX = 40
GROWTH = 1.05
GROWTH_RUN = 8
GROWTH_FROM = 20


def _log1m(w):
    """``log(1 - w)`` for complex ``w``; accurate for small ``w``."""
    return np.log1p(-w)


class ConformalMap:
    """Base class; subclasses implement ``log_abs_nodes`` and ``__call__``."""

    def anchors(self) -> tuple[complex, ...]:
        return ()

    def _check(self, z):
        z = np.asarray(z, dtype=complex)
        if np.any(np.abs(z) > 1 + 1e-15):
            raise ValueError("maps are defined on the closed unit disk")
        for s in self.anchors():
            if np.any(z == s):
                raise BranchPole(f"map is singular at {s}")
        return z

    def __call__(self, z):
        raise NotImplementedError

    def log_abs(self, z):
        return np.log(np.abs(self(z)))

    def log_abs_nodes(self, u: complex, d):
        """``log|f(u (1 - d))|`` for an anchor ``u``; default is direct."""
        return self.log_abs(u * (1 - d))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(ConformalMap):
    def __call__(self, z):
        z = self._check(z)
        return z[()] if z.ndim == 0 else z

    def log_abs(self, z):
        return np.log(np.abs(np.asarray(z, dtype=complex)))

    def to_dict(self):
        return {"type": "identity"}


@dataclass(frozen=True)
class Koebe(ConformalMap):
    """``z / (1 - z)**2`` onto the plane minus ``(-inf, -1/4]``."""

    def anchors(self):
        return (1 + 0j,)

    def __call__(self, z):
        z = self._check(z)
        out = z / (1 - z) ** 2
        return out[()] if out.ndim == 0 else out

    def log_abs(self, z):
        z = np.asarray(z, dtype=complex)
        return np.log(np.abs(z)) - 2 * np.log(np.abs(1 - z))

    def log_abs_nodes(self, u, d):
        if u != 1:
            return self.log_abs(u * (1 - d))
        # z = 1 - d
        return np.real(_log1m(d)) - 2 * np.log(np.abs(d))

    def to_dict(self):
        return {"type": "koebe"}


@dataclass(frozen=True)
class MobiusAuto(ConformalMap):
    """Disk automorphism ``(z + b) / (1 + conj(b) z)``, sending 0 to ``b``."""

    b: complex = 0j

    def __post_init__(self):
        if not abs(self.b) < 1:
            raise SpecError("MobiusAuto needs |b| < 1")

    def __call__(self, z):
        z = self._check(z)
        out = (z + self.b) / (1 + np.conj(self.b) * z)
        return out[()] if out.ndim == 0 else out

    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        return (w - self.b) / (1 - np.conj(self.b) * w)

    def to_dict(self):
        return {"type": "mobius_auto", "b": [self.b.real, self.b.imag]}


class _StripMap(ConformalMap):
    """Maps of the form ``exp(c * Log((1 + z) / (1 - z)))`` times a unimodular constant."""

    def anchors(self):
        return (1 + 0j, -1 + 0j)

    def _coef(self) -> complex:
        raise NotImplementedError

    def _phase(self) -> float:
        return 0.0

    @staticmethod
    def _strip(one_plus, one_minus):
        return np.log(one_plus) - np.log(one_minus)

    def __call__(self, z):
        z = self._check(z)
        w = self._strip(1 + z, 1 - z)
        out = np.exp(1j * self._phase() + self._coef() * w)
        return out[()] if out.ndim == 0 else out

    def log_abs(self, z):
        z = np.asarray(z, dtype=complex)
        return np.real(self._coef() * self._strip(1 + z, 1 - z))

    def log_abs_nodes(self, u, d):
        if u == 1:
            w = self._strip(2 - d, d)
        elif u == -1:
            w = self._strip(d, 2 - d)
        else:
            return self.log_abs(u * (1 - d))
        return np.real(self._coef() * w)


@dataclass(frozen=True)
class HansenSpiral(_StripMap):
    """Disk onto the spiral sector of order ``order`` between ``offset`` and ``offset + gap``.

    ``f(z) = exp(i (offset + gap/2)) * exp((gap cos s / pi) e^{-i s} Log((1+z)/(1-z)))``
    with ``s = order``.  At ``order = 0`` this is the power map onto a wedge.
    """

    order: float = 0.0
    gap: float = math.pi
    offset: float = 0.0

    def __post_init__(self):
        if not (0 <= self.order < math.pi / 2):
            raise SpecError("HansenSpiral order must lie in [0, pi/2)")
        if not (0 < self.gap <= 2 * math.pi):
            raise SpecError("HansenSpiral gap must lie in (0, 2 pi]")

    def _coef(self):
        return self.gap * math.cos(self.order) / math.pi * cmath.exp(-1j * self.order)

    def _phase(self):
        return self.offset + self.gap / 2

    def closed_form_mean(self, two_p: float) -> float:
        """Limit of the circular means of ``|f|**two_p``; ``inf`` past the threshold."""
        p = two_p / 2
        c2 = math.cos(self.order) ** 2
        if p * self.gap * c2 >= math.pi / 2:
            return math.inf
        return math.cosh(p * self.gap * math.sin(self.order) * math.cos(self.order)) / math.cos(
            p * self.gap * c2)

    def to_dict(self):
        return {"type": "hansen_spiral", "order": self.order, "gap": self.gap, "offset": self.offset}


@dataclass(frozen=True)
class WedgePower(_StripMap):
    """``((1+z)/(1-z))**(alpha/pi)``: disk onto the wedge of full angle ``alpha`` about the positive axis."""

    alpha: float = math.pi / 2

    def __post_init__(self):
        if not (0 < self.alpha <= 2 * math.pi):
            raise SpecError("WedgePower alpha must lie in (0, 2 pi]")

    def _coef(self):
        return complex(self.alpha / math.pi)

    def closed_form_mean(self, two_p: float) -> float:
        p = two_p / 2
        if p * self.alpha >= math.pi / 2:
            return math.inf
        return 1.0 / math.cos(p * self.alpha)

    def to_dict(self):
        return {"type": "wedge_power", "alpha": self.alpha}


@dataclass(frozen=True)
class Rotation(ConformalMap):
    """``f(e^{i angle} z)``."""

    inner: ConformalMap = field(default_factory=Identity)
    angle: float = 0.0

    def anchors(self):
        rot = cmath.exp(-1j * self.angle)
        return tuple(s * rot for s in self.inner.anchors())

    def __call__(self, z):
        z = self._check(z)
        return self.inner(np.exp(1j * self.angle) * z)

    def log_abs(self, z):
        return self.inner.log_abs(np.exp(1j * self.angle) * np.asarray(z, dtype=complex))

    def log_abs_nodes(self, u, d):
        rot = cmath.exp(1j * self.angle)
        for s in self.inner.anchors():
            if abs(u * rot - s) < 1e-14:
                return self.inner.log_abs_nodes(s, d)
        return self.log_abs(u * (1 - d))

    def to_dict(self):
        return {"type": "rotation", "map": self.inner.to_dict(), "angle": self.angle}


@dataclass(frozen=True)
class Composed(ConformalMap):
    """``f o phi_b`` with ``phi_b(z) = (z + b) / (1 + conj(b) z)``."""

    inner: ConformalMap = field(default_factory=Identity)
    b: complex = 0j

    def __post_init__(self):
        if not abs(self.b) < 1:
            raise SpecError("Composed needs |b| < 1")

    @property
    def phi(self) -> MobiusAuto:
        return MobiusAuto(self.b)

    def _pairs(self):
        bc = np.conj(self.b)
        return [((s - self.b) / (1 - bc * s), s) for s in self.inner.anchors()]

    def anchors(self):
        return tuple(u for u, _ in self._pairs())

    def __call__(self, z):
        z = self._check(z)
        return self.inner(self.phi(z))

    def log_abs(self, z):
        return self.inner.log_abs(self.phi(z))

    def log_abs_nodes(self, u, d):
        bc = np.conj(self.b)
        for uu, s in self._pairs():
            if abs(uu - u) < 1e-14:
                z = u * (1 - d)
                d2 = (1 - s * bc) * (u * d) / ((1 + bc * z) * s)
                return self.inner.log_abs_nodes(s, d2)
        return self.log_abs(u * (1 - d))

    def to_dict(self):
        return {"type": "composed", "map": self.inner.to_dict(), "b": [self.b.real, self.b.imag]}


def _point(v, what):
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise SpecError(f"{what} must be a [re, im] pair")
    try:
        z = complex(float(v[0]), float(v[1]))
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{what} must be numeric") from exc
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise SpecError(f"{what} must be finite")
    return z


def map_from_dict(obj) -> ConformalMap:
    if not isinstance(obj, dict) or "type" not in obj:
        raise SpecError("map spec must be an object with a 'type' field")
    kind = obj["type"]
    try:
        if kind == "identity":
            return Identity()
        if kind == "koebe":
            return Koebe()
        if kind == "mobius_auto":
            return MobiusAuto(_point(obj["b"], "b"))
        if kind == "hansen_spiral":
            return HansenSpiral(float(obj.get("order", 0.0)), float(obj["gap"]),
                                float(obj.get("offset", 0.0)))
        if kind == "wedge_power":
            return WedgePower(float(obj["alpha"]))
        if kind == "rotation":
            return Rotation(map_from_dict(obj["map"]), float(obj["angle"]))
        if kind == "composed":
            return Composed(map_from_dict(obj["map"]), _point(obj["b"], "b"))
    except KeyError as exc:
        raise SpecError(f"map spec of type {kind!r} is missing {exc}") from exc
    raise SpecError(f"unknown map type {kind!r}")


def map_eval(f: ConformalMap, z) -> complex:
    return f(z)


# ---------------------------------------------------------------------------
# quadrature

def _romberg_trap(g, a: float, b: float, tol: float, n0: int = 16, max_level: int = 14,
                  periodic: bool = False):
    """Trapezoid rule with interval doubling.

    Non-periodic integrands get a Romberg table on top; periodic ones use the
    plain rule, which is already spectrally accurate.  Returns
    ``(value, evaluations, converged)``.
    """
    n = n0
    x = np.linspace(a, b, n + 1)
    y = g(x)
    h = (b - a) / n
    if periodic:
        s = float(np.sum(y[:-1]))
        prev = s * h
        evals = n
        for _ in range(max_level):
            xm = a + h * (np.arange(n) + 0.5)
            s += float(np.sum(g(xm)))
            evals += n
            n *= 2
            h /= 2
            cur = s * h
            if abs(cur - prev) <= tol * abs(cur) or cur == prev:
                return cur, evals, True
            prev = cur
        return cur, evals, False
    s = float(np.sum(y[1:-1]) + 0.5 * (y[0] + y[-1]))
    rows = [[s * h]]
    evals = n + 1
    for _ in range(max_level):
        xm = a + h * (np.arange(n) + 0.5)
        s += float(np.sum(g(xm)))
        evals += n
        n *= 2
        h /= 2
        row = [s * h]
        for j, prev in enumerate(rows[-1]):
            f4 = 4.0 ** (j + 1)
            row.append(row[j] + (row[j] - prev) / (f4 - 1))
        rows.append(row)
        if len(rows) >= 4:
            cur, old = row[-1], rows[-2][-1]
            if abs(cur - old) <= tol * abs(cur) or cur == old:
                return cur, evals, True
    return rows[-1][-1], evals, False


def circular_mean(f: ConformalMap, two_p: float, r: float, tol: float = 1e-6,
                  delta: float | None = None):
    """``(1/2pi) int |f(r e^{it})|**two_p dt`` and the number of evaluations.

    ``delta`` is ``1 - r`` supplied exactly when ``r`` is close to 1.
    """
    if delta is None:
        delta = 1.0 - r
    anchors = f.anchors()

    def power(logs):
        return np.exp(two_p * logs)

    if not anchors:
        val, ev, ok = _romberg_trap(lambda t: power(f.log_abs(r * np.exp(1j * t))),
                                    0.0, 2 * math.pi, tol, n0=64, periodic=True)
        if not ok:
            raise QuadratureStall(f"angular quadrature did not converge at r={r}")
        return val / (2 * math.pi), ev
    ang = sorted(cmath.phase(s) % (2 * math.pi) for s in anchors)
    total, evals = 0.0, 0
    m = len(ang)
    for i, a0 in enumerate(ang):
        u = cmath.exp(1j * a0)
        left = ((a0 - ang[i - 1]) % (2 * math.pi) or 2 * math.pi) / 2
        right = ((ang[(i + 1) % m] - a0) % (2 * math.pi) or 2 * math.pi) / 2
        for sign, length in ((1.0, right), (-1.0, left)):
            def g(t, sign=sign):
                off = sign * delta * np.sinh(t)
                d = delta + 2 * r * np.sin(off / 2) ** 2 - 1j * r * np.sin(off)
                return power(f.log_abs_nodes(u, d)) * delta * np.cosh(t)
            val, ev, ok = _romberg_trap(g, 0.0, math.asinh(length / delta), tol)
            if not ok:
                raise QuadratureStall(f"angular quadrature did not converge at r={r}")
            total += val
            evals += ev
    return total / (2 * math.pi), evals


@dataclass
class HardyNormResult:
    two_p: float
    verdict: str
    value: float | None
    mean_limit: float | None
    radial_trace: list
    n_theta: int
    growth: list = field(default_factory=list)
    b: complex = 0j

    @property
    def divergent(self) -> bool:
        return self.verdict == "divergent"

    @property
    def finite(self) -> bool:
        return self.verdict == "finite"

    def to_dict(self) -> dict:
        return {"two_p": self.two_p, "verdict": self.verdict, "value": self.value,
                "mean_limit": self.mean_limit, "n_theta": self.n_theta,
                "b": [self.b.real, self.b.imag]}


def _verdict(means: np.ndarray, tol: float = 0.0):
    growth = means[1:] / means[:-1]
    ks = np.arange(2, len(means) + 1)
    run = 0
    for k, g in zip(ks, growth):
        run = run + 1 if (g > GROWTH and k >= GROWTH_FROM) else 0
        if run >= GROWTH_RUN:
            return "divergent", None, growth
    inc = np.diff(means)
    last = inc[-GROWTH_RUN:]
    scale = means[-1]
    # settled to within the angular quadrature's own accuracy
    if np.all(np.abs(last) <= max(tol, 1e-12) * scale):
        return "finite", float(means[-1]), growth
    q = last[1:] / last[:-1]
    if np.all(last > 0) and np.all(q < 0.95):
        qq = float(q[-1])
        return "finite", float(means[-1] + last[-1] * qq / (1 - qq)), growth
    return None, None, growth


def hardy_norm(f: ConformalMap, two_p: float, tol: float = 1e-6, k_max: int = K_MAX) -> HardyNormResult:
    """``H^{two_p}`` norm as the limit of circular means on ``r_k = 1 - 2**-k``.

    Divergent when the means grow by more than 5% for 8 consecutive ``k >= 20``;
    finite when the last increments decay geometrically, in which case the
    limit is Aitken-extrapolated, or have all fallen below ``tol``.
    """
    if not two_p > 0:
        raise ValueError("two_p must be positive")
    trace, means, n_theta = [], [], 0
    for k in range(1, k_max + 1):
        delta = 2.0 ** -k
        r = 1.0 - delta
        m, ev = circular_mean(f, two_p, r, tol, delta)
        trace.append((k, r, m))
        means.append(m)
        n_theta = max(n_theta, ev)
    verdict, limit, growth = _verdict(np.array(means), tol)
    if verdict is None:
        raise QuadratureStall("radial means neither converged nor diverged by k=%d" % k_max)
    value = None if limit is None else limit ** (1.0 / two_p)
    return HardyNormResult(two_p, verdict, value, limit, trace, n_theta, list(growth))


def hardy_norm_at(f: ConformalMap, two_p: float, b: complex, tol: float = 1e-6) -> HardyNormResult:
    """Basepoint-shifted norm, i.e. the norm of ``f o phi_b``."""
    b = complex(b)
    if not abs(b) < 1:
        raise ValueError("basepoint must satisfy |b| < 1")
    res = hardy_norm(f if b == 0 else Composed(f, b), two_p, tol)
    res.b = b
    return res


def poisson_kernel(b: complex, theta):
    """Density (w.r.t. ``dtheta / 2pi``) of the exit point from ``b`` on the unit circle."""
    b = complex(b)
    return (1 - abs(b) ** 2) / np.abs(1 - np.conj(b) * np.exp(1j * np.asarray(theta))) ** 2


def kernel_boundary_mean(f: ConformalMap, two_p: float, b: complex = 0j) -> float:
    """``(1/2pi) int |f(e^{it})|**two_p P_b(t) dt`` by adaptive quadrature.

    An independent route to ``hardy_norm_at`` for maps with integrable
    boundary singularities.
    """
    anchors = sorted(cmath.phase(s) % (2 * math.pi) for s in f.anchors())
    pts = sorted(set([0.0] + anchors + [2 * math.pi]))

    def g(t):
        z = complex(math.cos(t), math.sin(t))
        with np.errstate(divide="ignore"):
            la = float(f.log_abs(z))
        return math.exp(two_p * la) * float(poisson_kernel(b, t))

    total = 0.0
    for a0, a1 in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(g, a0, a1, limit=400, epsabs=0, epsrel=1e-10)
        total += val
    return total / (2 * math.pi)


# ---------------------------------------------------------------------------
# validation against domains and the moment side

def _disk_points(n: int, rng):
    st = as_stream(rng, STREAM_IMAGE)
    u, v = st.uniforms(np.arange(n, dtype=np.uint64), 0)
    return np.sqrt(u) * np.exp(2j * math.pi * v)


def image_membership_check(f: ConformalMap, target: Domain, n: int = 100_000, rng=0) -> float:
    """Fraction of ``n`` uniform disk points whose images lie in ``target``."""
    z = _disk_points(n, rng)
    with np.errstate(all="ignore"):
        w = np.asarray(f(z), dtype=complex)
    ok = np.isfinite(w) & target._contains(np.where(np.isfinite(w), w, 0))
    return float(np.count_nonzero(ok)) / n


@dataclass(frozen=True)
class HardyMomentReport:
    p: float
    start: complex
    hardy_mean: float
    moment: float
    moment_se: float
    quotient: float
    quotient_se: float
    membership: float


def hardy_vs_moment(f: ConformalMap, target: Domain, p: float, budget: int = 100_000,
                    config=None, rng=0, b: complex = 0j, membership_n: int = 100_000,
                    workers: int = 1) -> HardyMomentReport:
    """Quotient ``H^a_{2p}(W)**(2p) / E_a[(T_W + |a|^2)**p]`` with ``a = f(b)``."""
    from .estimators import estimate_moment
    from .sampler import sample_exits

    frac = image_membership_check(f, target, membership_n, rng)
    if frac < 1.0:
        raise SpecError(f"map image not contained in target (fraction {frac})")
    pstar = critical_exponent(target)
    if pstar is not None and p >= pstar:
        raise DivergentMoment(f"p={p} is not below the critical exponent {pstar:.4g}")
    a = complex(f(complex(b)))
    h = hardy_norm_at(f, 2 * p, b)
    if not h.finite:
        raise DivergentMoment("Hardy norm diverges at this exponent")
    batch = sample_exits(target, a, budget, config, rng, workers=workers)
    shifted = batch.exit_time + abs(a) ** 2
    batch.exit_time = shifted
    est = estimate_moment(batch, p, tail_index=math.inf)
    q = h.mean_limit / est.mean
    return HardyMomentReport(p, a, h.mean_limit, est.mean, est.std_err, q,
                             q * est.std_err / est.mean, frac)
