"""Planar domain algebra.

Domains are immutable dataclasses.  Each one answers four questions, all
vectorised over complex numpy arrays:

* membership (open set),
* a conservative distance to the boundary, used as the walk-on-spheres radius,
* a nearest-boundary projection (exact for the flat primitives, via the
  logarithmic plane for spiral families),
* a parametrised cover of the boundary, truncated at a modulus cap.

Spiral families are handled in logarithmic coordinates ``w = log z``.  The
logarithmic spiral ``{e^{i a} exp(t e^{-i s})}`` pulls back to the straight
line ``i a + t e^{-i s}`` (periodic in ``2 pi i``), so distances there are
exact, and the exp-image of a log-plane disk of radius ``d`` contains the
z-plane disk of radius ``|z| (1 - e^{-d})``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateSegment, PointOutsideDomain, SpecError

TWO_PI = 2.0 * math.pi
DEFAULT_CAP = 1e4
# membership tolerance for measure-zero excluded rays
_RAY_TOL = 1e-12


def _c(z):
    return np.asarray(z, dtype=complex)


def _scalarize(out, z):
    return out.item() if np.ndim(z) == 0 else out


def _wrap(x):
    """Reduce angles to [0, 2 pi)."""
    return np.mod(x, TWO_PI)


def _wrap_sym(x):
    """Reduce angles to [-pi, pi)."""
    return np.mod(x + math.pi, TWO_PI) - math.pi


@dataclass(frozen=True)
class Curve:
    """Parametrised boundary piece, ``s in [0, 1] -> complex``."""

    func: Callable = field(repr=False)
    label: str = ""
    bounded: bool = True

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))


def _line_param(cap: float):
    # geometric spacing in |t| so grids resolve the neighbourhood of the anchor
    big = math.asinh(cap)
    return lambda s: np.sinh((2.0 * s - 1.0) * big)


def _ray_param(cap: float):
    big = math.log1p(cap)
    return lambda s: np.expm1(s * big)


class Domain:
    """Base class; concrete domains implement the underscore methods."""

    spiral_order: float | None = None

    # -- vectorised internals -------------------------------------------
    def _contains(self, z):
        raise NotImplementedError

    def _dist(self, z):
        raise NotImplementedError

    def _project(self, z):
        raise NotImplementedError

    def curves(self, cap: float = DEFAULT_CAP) -> list[Curve]:
        raise NotImplementedError

    def circle_breaks(self, r: float) -> list[float]:
        """Angles where the circle ``|z| = r`` meets the boundary (if known)."""
        return []

    # -- public ---------------------------------------------------------
    def contains(self, z):
        z = _c(z)
        out = np.asarray(self._contains(np.atleast_1d(z))).reshape(z.shape)
        return _scalarize(out, z)

    def dist_lower_bound(self, z):
        z = _c(z)
        flat = np.atleast_1d(z)
        inside = self._contains(flat)
        if not np.all(inside):
            bad = flat[~inside][0]
            raise PointOutsideDomain(f"{bad!r} is not inside {self!r}")
        out = np.maximum(self._dist(flat), 0.0).reshape(z.shape)
        return _scalarize(out, z)

    def project(self, z):
        z = _c(z)
        out = self._project(np.atleast_1d(z)).reshape(z.shape)
        return _scalarize(out, z)

    def to_dict(self) -> dict:
        raise NotImplementedError


def _pt(z: complex) -> list:
    z = complex(z)
    return [z.real, z.imag]


@dataclass(frozen=True)
class Disk(Domain):
    center: complex = 0j
    radius: float = 1.0
    spiral_order = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise SpecError(f"disk radius must be positive, got {self.radius}")

    def _contains(self, z):
        return np.abs(z - self.center) < self.radius

    def _dist(self, z):
        return self.radius - np.abs(z - self.center)

    def _project(self, z):
        d = z - self.center
        m = np.abs(d)
        u = np.where(m > 0, d / np.where(m > 0, m, 1.0), 1.0)
        return self.center + self.radius * u

    def curves(self, cap=DEFAULT_CAP):
        c, r = self.center, self.radius
        return [Curve(lambda s: c + r * np.exp(1j * TWO_PI * s), "circle")]

    def circle_breaks(self, r):
        a = abs(self.center)
        if a == 0:
            return []
        val = (r * r + a * a - self.radius ** 2) / (2 * r * a)
        if abs(val) > 1:
            return []
        t = math.atan2(self.center.imag, self.center.real)
        h = math.acos(val)
        return [t - h, t + h]

    def to_dict(self):
        return {"type": "disk", "center": _pt(self.center), "radius": self.radius}


@dataclass(frozen=True)
class HalfPlane(Domain):
    """``{z : Re((z - boundary_point) e^{-i angle}) > 0}``."""

    boundary_point: complex = 0j
    inward_normal_angle: float = 0.0
    spiral_order = 0.0

    def __post_init__(self):
        object.__setattr__(self, "boundary_point", complex(self.boundary_point))
        if not math.isfinite(self.inward_normal_angle):
            raise SpecError("half-plane normal angle must be finite")

    @property
    def normal(self) -> complex:
        return complex(math.cos(self.inward_normal_angle), math.sin(self.inward_normal_angle))

    def _height(self, z):
        return ((z - self.boundary_point) * self.normal.conjugate()).real

    def _contains(self, z):
        return self._height(z) > 0

    def _dist(self, z):
        return self._height(z)

    def _project(self, z):
        return z - self._height(z) * self.normal

    def curves(self, cap=DEFAULT_CAP):
        p, tang, param = self.boundary_point, 1j * self.normal, _line_param(cap)
        return [Curve(lambda s: p + tang * param(s), "line", bounded=False)]

    def circle_breaks(self, r):
        n = self.normal
        h = (self.boundary_point * n.conjugate()).real
        if abs(h) > r:
            return []
        a = math.acos(h / r)
        return [self.inward_normal_angle - a, self.inward_normal_angle + a]

    def to_dict(self):
        return {"type": "half_plane", "boundary_point": _pt(self.boundary_point),
                "inward_normal_angle": self.inward_normal_angle}


def _ray_dist_proj(z, angle, start=0.0):
    """Distance from z to the ray ``{t e^{i angle} : t >= start}`` and the foot point."""
    u = complex(math.cos(angle), math.sin(angle))
    zr = z * u.conjugate()
    t = np.maximum(zr.real, start)
    foot = t * u
    return np.abs(z - foot), foot


@dataclass(frozen=True)
class Wedge(Domain):
    """Symmetric wedge ``|arg z| < half_angle`` with vertex 0 (full angle ``2*half_angle``)."""

    half_angle: float = math.pi / 4
    spiral_order = 0.0

    def __post_init__(self):
        if not (0 < self.half_angle <= math.pi):
            raise SpecError(f"wedge half angle must lie in (0, pi], got {self.half_angle}")

    @classmethod
    def from_angle(cls, angle: float) -> "Wedge":
        return cls(half_angle=angle / 2.0)

    @property
    def angle(self) -> float:
        return 2.0 * self.half_angle

    def _contains(self, z):
        return (np.abs(np.angle(z)) < self.half_angle) & (z != 0)

    def _dist(self, z):
        phi = self.half_angle - np.abs(np.angle(z))
        m = np.abs(z)
        return np.where(phi >= math.pi / 2, m, m * np.sin(phi))

    def _project(self, z):
        d1, f1 = _ray_dist_proj(z, self.half_angle)
        d2, f2 = _ray_dist_proj(z, -self.half_angle)
        return np.where(d1 <= d2, f1, f2)

    def curves(self, cap=DEFAULT_CAP):
        param = _ray_param(cap)
        out = []
        for sgn in (1, -1):
            u = complex(math.cos(self.half_angle), sgn * math.sin(self.half_angle))
            out.append(Curve(lambda s, u=u: u * param(s), f"ray{sgn:+d}", bounded=False))
        if self.half_angle == math.pi:
            out = out[:1]
        return out

    def circle_breaks(self, r):
        return [self.half_angle, -self.half_angle]

    def to_dict(self):
        return {"type": "wedge", "half_angle": self.half_angle}


def _log(z):
    return np.log(np.abs(z)), np.angle(z)


@dataclass(frozen=True)
class SpiralSector(Domain):
    """``N_lo^hi``: images of ``e^{i th} exp(t e^{-i sigma})`` for th in (lo, hi), t real.

    At ``order = 0`` this is the wedge ``lo < arg z < hi``.
    """

    order: float = 0.0
    angle_lo: float = 0.0
    angle_hi: float = math.pi

    def __post_init__(self):
        if not (0 <= self.order < math.pi / 2):
            raise SpecError(f"spiral order must lie in [0, pi/2), got {self.order}")
        gap = self.angle_hi - self.angle_lo
        if not (0 < gap <= TWO_PI):
            raise SpecError(f"sector gap must lie in (0, 2 pi], got {gap}")

    @property
    def spiral_order(self):
        return self.order

    @property
    def gap(self) -> float:
        return self.angle_hi - self.angle_lo

    def _theta(self, z):
        x, y = _log(z)
        return _wrap(y + x * math.tan(self.order) - self.angle_lo)

    def _contains(self, z):
        nz = z != 0
        zz = np.where(nz, z, 1.0)
        th = self._theta(zz)
        return nz & (th > 0) & (th < self.gap)

    def _angular_margin(self, z):
        th = self._theta(z)
        return np.minimum(th, self.gap - th)

    def _dist(self, z):
        zz = np.where(z != 0, z, 1.0)
        phi = self._angular_margin(zz)
        m = np.abs(z)
        if self.order == 0:
            return np.where(phi >= math.pi / 2, m, m * np.sin(np.minimum(phi, math.pi / 2)))
        dw = math.cos(self.order) * phi
        return m * -np.expm1(-dw)

    def _project(self, z):
        zz = np.where(z != 0, z, 1e-300)
        if self.order == 0:
            d1, f1 = _ray_dist_proj(zz, self.angle_lo)
            d2, f2 = _ray_dist_proj(zz, self.angle_hi)
            return np.where(d1 <= d2, f1, f2)
        th = self._theta(zz)
        move = np.where(th <= self.gap - th, -th, self.gap - th)
        x, y = _log(zz)
        w = x + 1j * y + move * math.cos(self.order) * 1j * np.exp(-1j * self.order)
        return np.exp(w)

    def _spiral(self, angle, cap):
        tmax = math.log(cap) / math.cos(self.order)
        d = np.exp(-1j * self.order)
        return lambda s: np.exp(1j * angle + (2.0 * s - 1.0) * tmax * d)

    def curves(self, cap=DEFAULT_CAP):
        out = [Curve(self._spiral(self.angle_lo, cap), "spiral_lo", bounded=False)]
        if self.gap < TWO_PI:
            out.append(Curve(self._spiral(self.angle_hi, cap), "spiral_hi", bounded=False))
        return out

    def circle_breaks(self, r):
        shift = math.log(r) * math.tan(self.order)
        return [self.angle_lo - shift, self.angle_hi - shift]

    def to_dict(self):
        return {"type": "spiral_sector", "order": self.order,
                "angle_lo": self.angle_lo, "angle_hi": self.angle_hi}


@dataclass(frozen=True)
class SpiralComplement(Domain):
    """``S_{r,D}``: the plane minus the spiral rays ``r e^{i a} exp(t e^{-i sigma})``, t >= 0, a in D."""

    order: float = 0.0
    start_radius: float = 1.0
    ray_angles: tuple = (0.0,)

    def __post_init__(self):
        if not (0 <= self.order < math.pi / 2):
            raise SpecError(f"spiral order must lie in [0, pi/2), got {self.order}")
        if not (math.isfinite(self.start_radius) and self.start_radius > 0):
            raise SpecError("start radius must be positive")
        angles = tuple(float(a) for a in self.ray_angles)
        if not angles:
            raise SpecError("at least one excluded ray is required")
        if any(not (0 <= a < TWO_PI) for a in angles):
            raise SpecError("ray angles must lie in [0, 2 pi)")
        if list(angles) != sorted(set(angles)):
            raise SpecError("ray angles must be sorted and distinct")
        object.__setattr__(self, "ray_angles", angles)

    @property
    def spiral_order(self):
        return self.order

    @property
    def max_gap(self) -> float:
        a = list(self.ray_angles)
        gaps = [b - c for c, b in zip(a, a[1:])] + [a[0] + TWO_PI - a[-1]]
        return max(gaps)

    def _offsets(self, z):
        """Per-ray signed angular offset (wrapped) and log-radius excess."""
        x, y = _log(z)
        dx = x - math.log(self.start_radius)
        th = y + dx * math.tan(self.order)
        return dx, [_wrap_sym(th - a) for a in self.ray_angles]

    def _contains(self, z):
        nz = z != 0
        zz = np.where(nz, z, 1.0)
        dx, offs = self._offsets(zz)
        on_ray = np.zeros(z.shape, dtype=bool)
        for off in offs:
            on_ray |= (dx >= 0) & (np.abs(off) <= _RAY_TOL)
        return ~on_ray | ~nz

    def _log_dist(self, z):
        """Exact log-plane distance to the excluded half-lines and the nearest foot."""
        x, y = _log(z)
        x0 = math.log(self.start_radius)
        s = self.order
        d = complex(math.cos(s), -math.sin(s))
        w = x + 1j * y
        best = np.full(z.shape, np.inf)
        foot = np.zeros(z.shape, dtype=complex)
        for a in self.ray_angles:
            th = y + (x - x0) * math.tan(s)
            cands = [np.round((th - a) / TWO_PI), np.round((y - a) / TWO_PI)]
            if s > 0:
                k0 = np.ceil(((y - a) * math.sin(s) - (x - x0) * math.cos(s)) / (TWO_PI * math.sin(s)))
                cands += [k0, k0 - 1]
            for k in cands:
                s0 = x0 + 1j * (a + TWO_PI * k)
                t = np.maximum(((w - s0) * d.conjugate()).real, 0.0)
                f = s0 + t * d
                dist = np.abs(w - f)
                better = dist < best
                best = np.where(better, dist, best)
                foot = np.where(better, f, foot)
        return best, foot

    def _dist(self, z):
        m = np.abs(z)
        disk = self.start_radius - m
        nz = z != 0
        zz = np.where(nz, z, 1.0)
        if self.order == 0:
            best = np.full(z.shape, np.inf)
            for a in self.ray_angles:
                dd, _ = _ray_dist_proj(zz, a, self.start_radius)
                best = np.minimum(best, dd)
            return np.where(nz, best, self.start_radius)
        dw, _ = self._log_dist(zz)
        return np.where(nz, np.maximum(m * -np.expm1(-dw), disk), self.start_radius)

    def _project(self, z):
        zz = np.where(z != 0, z, 1e-300)
        if self.order == 0:
            best = np.full(z.shape, np.inf)
            out = np.zeros(z.shape, dtype=complex)
            for a in self.ray_angles:
                dd, f = _ray_dist_proj(zz, a, self.start_radius)
                better = dd < best
                best = np.where(better, dd, best)
                out = np.where(better, f, out)
            return out
        _, foot = self._log_dist(zz)
        return np.exp(foot)

    def curves(self, cap=DEFAULT_CAP):
        r, s = self.start_radius, self.order
        tmax = math.log(max(cap / r, 1.0 + 1e-9)) / math.cos(s)
        d = np.exp(-1j * s)
        return [Curve(lambda u, a=a: r * np.exp(1j * a + u * tmax * d), f"ray{i}", bounded=False)
                for i, a in enumerate(self.ray_angles)]

    def circle_breaks(self, r):
        if r < self.start_radius:
            return []
        shift = math.log(r / self.start_radius) * math.tan(self.order)
        return [a - shift for a in self.ray_angles]

    def to_dict(self):
        return {"type": "spiral_complement", "order": self.order,
                "start_radius": self.start_radius, "ray_angles": list(self.ray_angles)}


@dataclass(frozen=True)
class Union(Domain):
    members: tuple = ()

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise SpecError("union needs at least one member")
        object.__setattr__(self, "members", members)

    @property
    def spiral_order(self):
        orders = {m.spiral_order for m in self.members}
        if None in orders or len(orders) != 1:
            return None
        return orders.pop()

    def _contains(self, z):
        out = np.zeros(z.shape, dtype=bool)
        for m in self.members:
            out |= m._contains(z)
        return out

    def _best(self, z):
        best = np.full(z.shape, -np.inf)
        which = np.zeros(z.shape, dtype=int)
        for i, m in enumerate(self.members):
            inside = m._contains(z)
            d = np.where(inside, m._dist(z), -np.inf)
            better = d > best
            best = np.where(better, d, best)
            which = np.where(better, i, which)
        return best, which

    def _dist(self, z):
        best, _ = self._best(z)
        return np.where(np.isfinite(best), best, 0.0)

    def _project(self, z):
        best, which = self._best(z)
        out = np.zeros(z.shape, dtype=complex)
        if not np.all(np.isfinite(best)):
            # outside every member: nearest member boundary
            gap = np.full(z.shape, np.inf)
            for m in self.members:
                f = m._project(z)
                g = np.abs(f - z)
                closer = g < gap
                gap = np.where(closer, g, gap)
                out = np.where(closer, f, out)
        for i, m in enumerate(self.members):
            sel = (which == i) & np.isfinite(best)
            if np.any(sel):
                out[sel] = m._project(z[sel])
        return out

    def curves(self, cap=DEFAULT_CAP):
        return [c for m in self.members for c in m.curves(cap)]

    def circle_breaks(self, r):
        return [b for m in self.members for b in m.circle_breaks(r)]

    def to_dict(self):
        return {"type": "union", "members": [m.to_dict() for m in self.members]}


def _circumcircle(a, b, c):
    aa, bb, cc = np.abs(a) ** 2, np.abs(b) ** 2, np.abs(c) ** 2
    num = aa * (b - c) + bb * (c - a) + cc * (a - b)
    den = np.conj(a) * (b - c) + np.conj(b) * (c - a) + np.conj(c) * (a - b)
    center = num / den
    return center, np.abs(a - center)


@dataclass(frozen=True)
class MobiusImage(Domain):
    """Image of ``base`` under ``u -> (a u + b) / (c u + d)``."""

    base: Domain = field(default_factory=Disk)
    a: complex = 1.0
    b: complex = 0.0
    c: complex = 0.0
    d: complex = 1.0

    def __post_init__(self):
        for k in "abcd":
            object.__setattr__(self, k, complex(getattr(self, k)))
        if abs(self.a * self.d - self.b * self.c) == 0:
            raise SpecError("Mobius coefficients must satisfy ad - bc != 0")

    def forward(self, u):
        return (self.a * u + self.b) / (self.c * u + self.d)

    def inverse(self, z):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.d * z - self.b) / (-self.c * z + self.a)

    def _contains(self, z):
        u = self.inverse(z)
        ok = np.isfinite(u)
        return ok & self.base._contains(np.where(ok, u, 0.0))

    def _dist(self, z):
        u = self.inverse(z)
        rho = np.maximum(self.base._dist(u), 0.0)
        if self.c != 0:
            pole = -self.d / self.c
            rho = np.minimum(rho, 0.5 * np.abs(u - pole))
        cen, rad = _circumcircle(self.forward(u + rho), self.forward(u + 1j * rho), self.forward(u - rho))
        out = rad - np.abs(z - cen)
        return np.where(np.isfinite(out) & (rho > 0), np.maximum(out, 0.0), 0.0)

    def _project(self, z):
        return self.forward(self.base._project(self.inverse(z)))

    def curves(self, cap=DEFAULT_CAP):
        return [Curve(lambda s, cv=cv: self.forward(cv(s)), f"mobius:{cv.label}", bounded=False)
                for cv in self.base.curves(cap)]

    def to_dict(self):
        return {"type": "mobius_image", "base": self.base.to_dict(),
                "coefficients": [_pt(self.a), _pt(self.b), _pt(self.c), _pt(self.d)]}


# ---------------------------------------------------------------------------
# module-level operations


def contains(domain: Domain, z):
    return domain.contains(z)


def dist_lower_bound(domain: Domain, z):
    return domain.dist_lower_bound(z)


@dataclass(frozen=True)
class BoundarySegment:
    """A union of parametrised boundary pieces ``(curve, s0, s1)``."""

    parent: Domain
    pieces: tuple
    tag: str = "boundary"
    cap: float = DEFAULT_CAP

    @property
    def truncated(self) -> bool:
        return any(not cv.bounded for cv, _, _ in self.pieces)

    @property
    def empty(self) -> bool:
        return not self.pieces

    def __call__(self, s):
        """Map ``s in [0, 1]`` across the pieces, weighted by parameter length."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        lengths = np.array([s1 - s0 for _, s0, s1 in self.pieces])
        edges = np.concatenate([[0.0], np.cumsum(lengths) / lengths.sum()])
        out = np.empty(s.shape, dtype=complex)
        idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(self.pieces) - 1)
        for i, (cv, s0, s1) in enumerate(self.pieces):
            sel = idx == i
            if np.any(sel):
                loc = (s[sel] - edges[i]) / (edges[i + 1] - edges[i])
                out[sel] = cv(s0 + (s1 - s0) * loc)
        return out


def full_boundary(domain: Domain, cap: float = DEFAULT_CAP, tag: str = "boundary") -> BoundarySegment:
    if isinstance(domain, Union):
        # member curves minus the parts swallowed by other members
        return segment_where(domain, lambda z: ~domain._contains(z) | (domain._dist(z) < 1e-9 * np.maximum(1.0, np.abs(z))),
                             tag, cap)
    return BoundarySegment(domain, tuple((cv, 0.0, 1.0) for cv in domain.curves(cap)), tag, cap)


def boundary_grid(segment: BoundarySegment, n: int, margin: float = 1e-3) -> np.ndarray:
    """``n`` points spread over the pieces, each piece's endpoints clipped inward."""
    if n < 2:
        raise ValueError("boundary_grid needs n >= 2")
    if segment.empty:
        raise DegenerateSegment(f"segment {segment.tag!r} has no pieces")
    lengths = np.array([s1 - s0 for _, s0, s1 in segment.pieces])
    counts = np.maximum(1, np.floor(n * lengths / lengths.sum()).astype(int))
    while counts.sum() < n:
        counts[np.argmax(lengths / counts)] += 1
    while counts.sum() > n:
        counts[np.argmax(counts)] -= 1
    pts = []
    for (cv, s0, s1), m in zip(segment.pieces, counts):
        if m == 0:
            continue
        loc = np.array([0.5]) if m == 1 else np.linspace(margin, 1.0 - margin, m)
        pts.append(cv(s0 + (s1 - s0) * loc))
    pts = np.concatenate(pts)
    if np.max(np.abs(pts - pts[0])) == 0:
        raise DegenerateSegment(f"segment {segment.tag!r} collapses to a point")
    return pts


def refine_grid(segment: BoundarySegment, n: int, margin: float = 1e-3) -> np.ndarray:
    """Grid with roughly twice the density whose points include ``boundary_grid(segment, n)``."""
    base = boundary_grid(segment, n, margin)
    lengths = np.array([s1 - s0 for _, s0, s1 in segment.pieces])
    counts = np.maximum(1, np.floor(n * lengths / lengths.sum()).astype(int))
    while counts.sum() < n:
        counts[np.argmax(lengths / counts)] += 1
    while counts.sum() > n:
        counts[np.argmax(counts)] -= 1
    pts = []
    for (cv, s0, s1), m in zip(segment.pieces, counts):
        if m < 2:
            continue
        loc = np.linspace(margin, 1.0 - margin, 2 * m - 1)
        pts.append(cv(s0 + (s1 - s0) * loc))
    return np.concatenate(pts) if pts else base


def _bisect(pred, lo, hi, iters=50):
    """Refine a transition of ``pred`` between ``lo`` (pred(lo)) and ``hi``; vectorised."""
    lo = np.asarray(lo, dtype=float).copy()
    hi = np.asarray(hi, dtype=float).copy()
    plo = pred(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pm = pred(mid)
        same = pm == plo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def segment_where(domain: Domain, predicate, tag: str, cap: float = DEFAULT_CAP,
                  resolution: int = 4096) -> BoundarySegment:
    """Portions of ``domain``'s boundary cover on which ``predicate(points)`` holds.

    Runs are located on a uniform parameter sweep and their endpoints refined
    by bisection.
    """
    pieces = []
    s = np.linspace(0.0, 1.0, resolution + 1)
    for cv in domain.curves(cap):
        def pred(t, cv=cv):
            return predicate(cv(t))
        flags = pred(s)
        if not np.any(flags):
            continue
        change = np.flatnonzero(np.diff(flags.astype(int)))
        cut = _bisect(pred, s[change], s[change + 1]) if len(change) else np.array([])
        bounds = np.concatenate([[0.0], cut, [1.0]])
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b > a and pred(np.array([0.5 * (a + b)]))[0]:
                pieces.append((cv, float(a), float(b)))
    return BoundarySegment(domain, tuple(pieces), tag, cap)


def largest_arc(domain: Domain, r: float, resolution: int = 4096, tol: float = 1e-6,
                detail: bool = False):
    """Angular measure of the largest subarc of ``{|z| = r}`` inside ``domain``.

    Analytic boundary crossings from the domain are combined with sign changes
    of membership on an angular sweep (refined by bisection well below
    ``tol``).  Returns 0 when the circle misses the domain.
    """
    if not r > 0:
        raise ValueError("radius must be positive")

    def inside(phi):
        return domain._contains(r * np.exp(1j * np.asarray(phi, dtype=float)))

    phi = np.linspace(0.0, TWO_PI, resolution, endpoint=False)
    flags = inside(phi)
    nxt = np.roll(flags, -1)
    change = np.flatnonzero(flags != nxt)
    hi = phi[change] + TWO_PI / resolution
    iters = max(10, int(math.ceil(math.log2((TWO_PI / resolution) / (tol * 1e-6)))))
    sweep = _bisect(inside, phi[change], hi, iters=iters) if len(change) else np.array([])
    hints = np.asarray(domain.circle_breaks(r), dtype=float)
    breaks = np.unique(np.round(_wrap(np.concatenate([sweep, hints])), 13))
    full = False
    if breaks.size == 0:
        best = TWO_PI if flags.any() else 0.0
        full = bool(flags.any())
    else:
        nb = breaks.size
        ends = np.concatenate([breaks[1:], [breaks[0] + TWO_PI]])
        mids = 0.5 * (breaks + ends)
        arc_in = inside(mids)
        sep = ~inside(breaks)
        lengths = ends - breaks
        if arc_in.all() and not sep.any():
            best, full = TWO_PI, True
        elif not arc_in.any():
            best = 0.0
        else:
            # start the cyclic scan right after a hard separator
            hard = np.flatnonzero(~arc_in | np.roll(sep, -1))
            start = (hard[0] + 1) % nb
            best = run = 0.0
            for j in range(nb):
                i = (start + j) % nb
                if arc_in[i]:
                    run += lengths[i]
                    best = max(best, run)
                    if sep[(i + 1) % nb]:
                        run = 0.0
                else:
                    run = 0.0
    if detail:
        return best, {"breaks": breaks.tolist(), "full_circle": full}
    return best


def limiting_arc(domain: Domain, r0: float = 1.0, factor: float = 10.0, count: int = 9,
                 tol: float = 1e-6) -> tuple[float, dict]:
    """``A_W``: the largest arc along a geometric radius sequence, with diagnostics."""
    radii = [r0 * factor ** k for k in range(count)]
    arcs, fulls = [], []
    for r in radii:
        a, info = largest_arc(domain, r, detail=True)
        arcs.append(a)
        fulls.append(info["full_circle"])
    converged = abs(arcs[-1] - arcs[-2]) < tol if count > 1 else False
    return arcs[-1], {"radii": radii, "arcs": arcs, "converged": converged,
                      "full_circle": fulls[-1]}


# relative accuracy of critical_exponent (arcs are resolved to about 1e-6)
EXPONENT_RTOL = 1e-6


def below_critical(p: float, pstar: float) -> bool:
    """``p < pstar`` with ties inside the arc resolution counted as not below."""
    return bool(p < pstar * (1.0 - EXPONENT_RTOL))


def critical_exponent(domain: Domain) -> float | None:
    """``pi / (2 A_W cos^2 sigma)`` for spiral-like domains; ``None`` when unknown.

    A domain containing whole circles at every large radius has an infinite
    exit time, reported as 0.
    """
    s = domain.spiral_order
    if s is None:
        return None
    a, info = limiting_arc(domain)
    if info["full_circle"]:
        return 0.0
    if a == 0:
        return math.inf
    return math.pi / (2.0 * a * math.cos(s) ** 2)


# ---------------------------------------------------------------------------
# JSON specs


def _cpx(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, dict) and {"re", "im"} <= set(v):
        return complex(float(v["re"]), float(v["im"]))
    raise SpecError(f"cannot read complex point from {v!r}")


def domain_from_dict(d: dict) -> Domain:
    try:
        kind = d["type"]
        if kind == "disk":
            return Disk(_cpx(d.get("center", 0)), float(d["radius"]))
        if kind == "half_plane":
            return HalfPlane(_cpx(d.get("boundary_point", 0)), float(d.get("inward_normal_angle", 0.0)))
        if kind == "wedge":
            if "half_angle" in d:
                return Wedge(float(d["half_angle"]))
            return Wedge.from_angle(float(d["angle"]))
        if kind == "spiral_sector":
            return SpiralSector(float(d.get("order", 0.0)), float(d["angle_lo"]), float(d["angle_hi"]))
        if kind == "spiral_complement":
            return SpiralComplement(float(d.get("order", 0.0)), float(d.get("start_radius", 1.0)),
                                    tuple(float(a) for a in d["ray_angles"]))
        if kind == "union":
            return Union(tuple(domain_from_dict(m) for m in d["members"]))
        if kind == "mobius_image":
            a, b, c, dd = (_cpx(v) for v in d["coefficients"])
            return MobiusImage(domain_from_dict(d["base"]), a, b, c, dd)
    except SpecError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad domain spec {d!r}: {exc}") from exc
    raise SpecError(f"unknown domain type {d.get('type')!r}")


def load_domain(path) -> Domain:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read domain file {path}: {exc}") from exc
    return domain_from_dict(data)


def domain_to_dict(domain: Domain) -> dict:
    return domain.to_dict()


def slit_plane(start_radius: float = 1.0, angle: float = 0.0) -> SpiralComplement:
    """The plane minus a single radial ray, ``S_D`` with one angle."""
    return SpiralComplement(0.0, start_radius, (angle,))


def random_interior_points(domain: Domain, n: int, radius: float, seed: int = 0,
                           rmin: float = 1e-3) -> np.ndarray:
    """Log-uniform-in-modulus point cloud filtered to the domain (test helper)."""
    rng = np.random.default_rng(seed)
    out = []
    need = n
    while need > 0:
        m = 4 * need + 64
        mod = np.exp(rng.uniform(math.log(rmin), math.log(radius), m))
        z = mod * np.exp(1j * rng.uniform(0, TWO_PI, m))
        z = z[domain._contains(z)]
        out.append(z[:need])
        need -= len(z[:need])
    return np.concatenate(out)


__all__: Sequence[str] = (
    "Domain", "Disk", "HalfPlane", "Wedge", "SpiralSector", "SpiralComplement", "Union",
    "MobiusImage", "Curve", "BoundarySegment", "contains", "dist_lower_bound", "boundary_grid",
    "refine_grid", "full_boundary", "segment_where", "largest_arc", "limiting_arc",
    "critical_exponent", "domain_from_dict", "domain_to_dict", "load_domain", "slit_plane",
)
